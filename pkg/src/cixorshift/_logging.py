# std
import inspect
import functools as ftl

# third-party
from loguru import logger


# ---------------------------------------------------------------------------- #
def owner_of(kls, name):
    """
    Find the class in the mro of `kls` that defines attribute `name`.

    Parameters
    ----------
    kls : type
        Class whose method resolution order will be searched.
    name : str
        Attribute (usually method) name.

    Returns
    -------
    type or None
        Defining class, or None if `name` is not found on `kls`.
    """
    for base in inspect.getmro(kls):
        if name in vars(base):
            return base
    return None


def _prefix_owner(record, kls):
    # rewrite 'step' as 'CiGenerator.step' in the record
    name = record['function']
    if name.startswith('<'):
        # module level code, lambdas, comprehensions
        return

    if owner := owner_of(kls, name):
        record['function'] = f'{owner.__name__}.{name}'


class LoggingMixin:
    """
    Mixin giving classes a `logger` attribute that tags every record with the
    name of the class that defined the emitting method.
    """

    class Logger:
        # descriptor: works on the class and the instance alike, and keeps the
        # (unpicklable) patched logger out of instance state

        def __get__(self, obj, kls=None):
            return logger.patch(ftl.partial(_prefix_owner, kls=(kls or type(obj))))

    logger = Logger()
