import logging
import math
import multiprocessing
from queue import Empty

from tqdm import tqdm

from .exceptions import DegenerateWindowError, SpdeReactError
from .utils import Counter, RunFailure, format_stats_line, iter_batches, yield_from_process


class _WorkerError:

    def __init__(self, run_index, exc):
        self.run_index = run_index
        self.exc = exc


class MonteCarloPipeline:
    """
    Run `task(seed)` for seeds base_seed + r, r = 0, ..., n_runs - 1, over a bounded pool of forked processes.
    Results come back ordered by run index whatever the scheduling, so output never depends on the worker count.
    Runs whose observation window holds no usable data yield a RunFailure and are counted; any other error aborts.
    """

    def __init__(self, task, n_runs, base_seed=0, workers=1, desc="Running Monte-Carlo simulations."):
        self.task = task
        self.n_runs = n_runs
        self.base_seed = base_seed
        self.workers = max(1, min(workers, n_runs))
        self.desc = desc
        self.failures = Counter()
        self.processes = []

    def __enter__(self):
        self.pbar = tqdm(total=self.n_runs, desc=f'{"INFO": <8} {self.desc}')
        if self.workers > 1:
            ctx = multiprocessing.get_context("fork")
            self.queue = ctx.Queue()
            self.processes = [
                ctx.Process(target=self._run_batch, args=(batch,))
                for batch in iter_batches(list(range(self.n_runs)), math.ceil(self.n_runs / self.workers))
            ]
            for p in self.processes:
                p.start()
            logging.debug("Started %s worker processes for %s runs.", len(self.processes), self.n_runs)
        return self

    def __exit__(self, type, value, traceback):
        for p in self.processes:
            if p.is_alive():
                p.terminate()
            p.join()
        self.pbar.close()

    def _run_one(self, run_index):
        seed = self.base_seed + run_index
        try:
            return self.task(seed)
        except DegenerateWindowError as e:
            logging.debug("Run %s (seed %s) failed: %s", run_index, seed, e)
            self.failures.increment()
            return RunFailure(run_index, str(e))

    def _run_batch(self, batch):
        for run_index in batch:
            try:
                self.queue.put((run_index, self._run_one(run_index)))
            except Exception as e:
                self.queue.put((run_index, _WorkerError(run_index, e)))
                return

    def results(self):
        """
        Block until every run has reported and return the results ordered by run index.
        """
        if self.workers == 1:
            results = []
            for run_index in range(self.n_runs):
                results.append(self._run_one(run_index))
                self.pbar.update()
            return results
        collected = {}
        for p in self.processes:
            for run_index, result in yield_from_process(self.queue, p, self.pbar):
                self._collect(collected, run_index, result)
        while len(collected) < self.n_runs:
            try:
                run_index, result = self.queue.get(timeout=5)
            except Empty:
                raise SpdeReactError("Worker processes exited after reporting %s of %s runs."
                                     % (len(collected), self.n_runs))
            self.pbar.update()
            self._collect(collected, run_index, result)
        return [collected[r] for r in range(self.n_runs)]

    @staticmethod
    def _collect(collected, run_index, result):
        if isinstance(result, _WorkerError):
            raise result.exc
        collected[run_index] = result

    @property
    def n_failed(self):
        return self.failures.value


def run_monte_carlo(task, n_runs, base_seed=0, workers=1, desc="Running Monte-Carlo simulations."):
    """
    Results of all runs ordered by run index. Failed runs stay in the list as RunFailure objects.
    """
    with MonteCarloPipeline(task, n_runs, base_seed, workers, desc) as pipeline:
        results = pipeline.results()
    if pipeline.n_failed:
        logging.warning(format_stats_line("Runs without usable data", n_runs, pipeline.n_failed).rstrip())
    return results
