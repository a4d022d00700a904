"""Wall-clock timing of solver and simulation phases."""

import logging
import time

import numpy as np

logger = logging.getLogger(__name__)


class Timer(object):
    """Accumulates laps between start() and pause(); stop() logs a summary.

    Usable as a context manager around a single phase:

        with Timer("synth n_c=1"):
            synthesize(plant, 1)
    """

    def __init__(self, task_name="untitled"):
        self.task_name = task_name
        self.laps = []
        self._lap_start = None

    @property
    def is_timing(self):
        return self._lap_start is not None

    def start(self):
        if self._lap_start is None:
            self._lap_start = time.perf_counter()

    def pause(self):
        if self._lap_start is not None:
            self.laps.append(time.perf_counter() - self._lap_start)
            self._lap_start = None

    def stop(self):
        self.pause()
        self.report()

    def report(self):
        logger.info("%s: %.3fs over %d lap(s), mean %.3fs",
                    self.task_name, self.duration, self.count, self.mean)

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()
        return False

    @property
    def duration(self):
        return float(np.sum(self.laps))

    @property
    def mean(self):
        return float(np.mean(self.laps)) if self.laps else 0.0

    @property
    def count(self):
        return len(self.laps)
