import logging

from scrapy.utils.log import configure_logging

from .exceptions import SilentDropStep


def configure(settings):
    """Install the root handler from LOG_* settings and quiet chatty libraries."""

    configure_logging(settings, install_root_handler=True)

    for name in settings.getlist("QUIET_LOGGERS"):
        logging.getLogger(name).setLevel(logging.WARNING)


def dropped(logger, step, exception):
    """Log a dropped step record at a level matching the exception."""

    # default is warning, silent drops only matter when debugging
    level = logging.DEBUG if isinstance(exception, SilentDropStep) else logging.WARNING
    logger.log(level, "Dropped step %s: %s", step.get("step"), exception)
