import logging

LOGGER_NAME = "_cellscribe_"


def get_logger():
    # Configure logging at the module level
    logging.basicConfig(level=logging.INFO, format="%(levelname)-8s %(message)s")
    logger = logging.getLogger(LOGGER_NAME)

    return logger


def set_verbosity(verbose: bool = False, quiet: bool = False):
    logger = get_logger()
    if verbose:
        logger.setLevel(logging.DEBUG)
    elif quiet:
        logger.setLevel(logging.WARNING)
    else:
        logger.setLevel(logging.INFO)
    return logger
