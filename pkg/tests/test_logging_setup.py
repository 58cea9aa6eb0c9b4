from __future__ import annotations

import logging

import pytest

from cfsurv.logging_utils import configure_logging, setup_logging


@pytest.fixture
def clean_root_logger():
    root_logger = logging.getLogger()
    previous_handlers = root_logger.handlers[:]
    previous_level = root_logger.level
    for handler in previous_handlers:
        root_logger.removeHandler(handler)
    try:
        yield root_logger
    finally:
        for handler in root_logger.handlers[:]:
            root_logger.removeHandler(handler)
            handler.close()
        root_logger.setLevel(previous_level)
        for handler in previous_handlers:
            root_logger.addHandler(handler)


def test_setup_logging_creates_parent_directory(tmp_path, clean_root_logger) -> None:
    log_file = tmp_path / "outputs" / "logs" / "cfsurv.log"

    setup_logging(filename=str(log_file))
    logging.getLogger(__name__).info("trigger file handler")
    for handler in clean_root_logger.handlers:
        handler.flush()

    assert log_file.exists()
    assert "trigger file handler" in log_file.read_text(encoding="utf-8")


def test_configure_logging_reads_the_config_section(tmp_path, clean_root_logger) -> None:
    log_file = tmp_path / "run.log"
    configure_logging({"level": "warning", "file": str(log_file), "format": "%(levelname)s|%(message)s"})
    logging.getLogger("cfsurv.test").info("hidden")
    logging.getLogger("cfsurv.test").warning("shown")
    for handler in clean_root_logger.handlers:
        handler.flush()

    assert clean_root_logger.level == logging.WARNING
    assert log_file.read_text(encoding="utf-8").strip() == "WARNING|shown"


def test_console_handler_is_not_duplicated(clean_root_logger) -> None:
    configure_logging(None)
    installed = clean_root_logger.handlers[:]
    configure_logging({"level": "DEBUG"})
    assert clean_root_logger.handlers == installed
    assert clean_root_logger.level == logging.DEBUG
