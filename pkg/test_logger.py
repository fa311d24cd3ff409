"""Tests for the pipeline logger"""
import logging

from logger import log


def test_log_step_formats_source_and_destination(caplog):
    with caplog.at_level(logging.INFO, logger="DengueToolkit"):
        log.log_step("TRAIN", "cohort.csv", "model.json", "COMPLETED")
        log.log_step("PARSE", "cohort.csv")
    assert "[COMPLETED] TRAIN: cohort.csv -> model.json" in caplog.text
    assert "[PLANNED] PARSE: cohort.csv" in caplog.text


def test_session_summary_lists_every_stat(caplog):
    with caplog.at_level(logging.INFO, logger="DengueToolkit"):
        log.session_summary({"Instances": 65, "Cells imputed": 48})
    assert "RUN SUMMARY" in caplog.text
    assert "Instances: 65" in caplog.text
    assert "Cells imputed: 48" in caplog.text


def test_warnings_are_recorded(caplog):
    with caplog.at_level(logging.WARNING, logger="DengueToolkit"):
        log.warning("IRLS did not converge")
    assert caplog.records[-1].levelname == "WARNING"
