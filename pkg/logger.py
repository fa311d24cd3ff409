"""
Logging system for the Dengue Diagnosis Toolkit
Tracks every pipeline step so experiment runs can be audited
"""
import logging
from datetime import datetime
from config import LOG_FILE, LOG_LEVEL


class PipelineLogger:
    def __init__(self):
        """Initialize the logger with file and error-stream output"""
        self.logger = logging.getLogger("DengueToolkit")
        self.logger.setLevel(logging.DEBUG)

        # Prevent duplicate handlers
        if self.logger.handlers:
            self.logger.handlers.clear()

        # File handler - saves to log file
        try:
            file_handler = logging.FileHandler(LOG_FILE, encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)
            file_format = logging.Formatter(
                '%(asctime)s - %(levelname)s - %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            )
            file_handler.setFormatter(file_format)
            self.logger.addHandler(file_handler)
        except OSError:
            # Read-only install: console only
            pass

        # Console handler - stderr, stdout is reserved for data
        console_handler = logging.StreamHandler()
        console_handler.setLevel(getattr(logging, LOG_LEVEL))
        console_format = logging.Formatter('%(levelname)s: %(message)s')
        console_handler.setFormatter(console_format)
        self.logger.addHandler(console_handler)

        self.logger.debug("=" * 60)
        self.logger.debug(f"Dengue Toolkit Session Started: {datetime.now()}")
        self.logger.debug("=" * 60)

    def info(self, message):
        """Log informational message"""
        self.logger.info(message)

    def warning(self, message):
        """Log warning message"""
        self.logger.warning(message)

    def error(self, message):
        """Log error message"""
        self.logger.error(message)

    def debug(self, message):
        """Log debug message"""
        self.logger.debug(message)

    def log_step(self, step, source, destination=None, status="PLANNED"):
        """
        Log a pipeline step with details

        Args:
            step: Type of step (PARSE, IMPUTE, TRAIN, EVALUATE, etc.)
            source: Input the step reads (file path or description)
            destination: Output the step writes (if applicable)
            status: Step status (PLANNED, COMPLETED, FAILED, SKIPPED)
        """
        if destination:
            self.logger.info(f"[{status}] {step}: {source} -> {destination}")
        else:
            self.logger.info(f"[{status}] {step}: {source}")

    def session_summary(self, stats):
        """
        Log summary of a command run

        Args:
            stats: Dictionary with run statistics
        """
        self.logger.info("=" * 60)
        self.logger.info("RUN SUMMARY")
        self.logger.info("-" * 60)
        for key, value in stats.items():
            self.logger.info(f"{key}: {value}")
        self.logger.info("=" * 60)


# Create a global logger instance
log = PipelineLogger()
