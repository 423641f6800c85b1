import argparse
import logging
import multiprocessing
import os
from queue import Empty
import resource
import sys

from .constants import WORKERS_ENV_VAR
from .exceptions import ConfigError


class CustomArgumentParser(argparse.ArgumentParser):
    """
    Argument parser reporting usage errors with the configuration-error exit code.
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, "%s: error: %s\n" % (self.prog, message))


class Falsey:

    def __bool__(self):
        return False


class RunFailure(Falsey):
    """
    Placeholder result for a Monte-Carlo run that produced no usable estimate.
    """

    def __init__(self, run_index, reason):
        self.run_index = run_index
        self.reason = reason

    def __repr__(self):
        return "<%s: run %s, %s>" % (self.__class__.__name__, self.run_index, self.reason)


class Counter:

    def __init__(self):
        self.val = multiprocessing.Value('i', 0)
        self.lock = multiprocessing.Lock()

    def increment(self):
        with self.lock:
            self.val.value += 1

    @property
    def value(self):
        with self.lock:
            return self.val.value


def resolve_workers(cli_value=None, config_value=None):
    """
    Worker count from the command line, else the environment, else the config file, else 1.
    """
    if cli_value is not None:
        workers = cli_value
    elif os.environ.get(WORKERS_ENV_VAR):
        try:
            workers = int(os.environ[WORKERS_ENV_VAR])
        except ValueError:
            raise ConfigError("%s must be an integer, got '%s'." % (WORKERS_ENV_VAR, os.environ[WORKERS_ENV_VAR]))
    elif config_value is not None:
        workers = config_value
    else:
        workers = 1
    if workers < 1:
        raise ConfigError("Worker count must be at least 1, got %s." % workers)
    return workers


def format_stats_line(msg, total, numerator=None):
    """
    Format given statistics message with optional percentage.
    """
    msg += ": "
    if numerator is None:
        msg += "{}\n".format(total)
    else:
        msg += "{} ({}%)\n".format(numerator, round(100 * numerator / total) if total else 0)
    return msg


def iter_batches(lst, n):
    """
    Yield successive n-sized chunks from lst.
    """
    for i in range(0, len(lst), n):
        yield lst[i:i + n]


def yield_from_process(q, p, pbar=None):
    """
    Yield items in queue q while process p is alive. Draining while waiting prevents the child from blocking
    on a full queue.
    Pass an optional tqdm progress bar (pbar) to keep a single progress bar running over multiple processes.
    """
    while p.is_alive():
        p.join(timeout=1)
        while True:
            try:
                yield q.get(block=False)
                if pbar:
                    pbar.update()
            except Empty:
                break


def limit_memory(maxsize):
    """
    Limit total available memory globally to maxsize bytes. Will throw MemoryError if breached.
    """
    _, hard = resource.getrlimit(resource.RLIMIT_AS)
    if hard != resource.RLIM_INFINITY:
        maxsize = min(maxsize, hard)
    resource.setrlimit(resource.RLIMIT_AS, (int(maxsize), hard))
    logging.debug("Memory limited to %s bytes.", int(maxsize))
