"""
Performance Module
Multi-threaded fold evaluation with results merged in fold order
"""
import queue
import threading
from typing import Any, Callable, Dict, List, Sequence

from logger import log


class ThreadedFoldRunner:
    def __init__(self, num_threads: int = 4):
        """
        Multi-threaded runner for independent cross-validation folds

        Args:
            num_threads: Number of worker threads
        """
        self.num_threads = max(1, num_threads)
        self.task_queue = queue.Queue()
        self.result_queue = queue.Queue()

    def worker(self, process_func: Callable[[int, Any], Any]):
        """Worker thread that evaluates folds until it takes a poison pill"""
        while True:
            task = self.task_queue.get()
            if task is None:  # Poison pill
                self.task_queue.task_done()
                break

            index, item = task
            try:
                self.result_queue.put((index, "success", process_func(index, item)))
            except Exception as e:
                self.result_queue.put((index, "error", e))
            self.task_queue.task_done()

    def run(self, items: Sequence[Any], process_func: Callable[[int, Any], Any]) -> List[Any]:
        """
        Apply process_func(index, item) to every item on the worker pool

        Args:
            items: Work items (one per fold)
            process_func: Function of (fold index, item)

        Returns:
            Results in item order

        Raises:
            The exception of the lowest-index failing item
        """
        threads = []
        for _ in range(min(self.num_threads, max(1, len(items)))):
            t = threading.Thread(target=self.worker, args=(process_func,), daemon=True)
            t.start()
            threads.append(t)

        for index, item in enumerate(items):
            self.task_queue.put((index, item))

        # Add poison pills
        for _ in threads:
            self.task_queue.put(None)

        self.task_queue.join()
        for t in threads:
            t.join()

        results: Dict[int, Any] = {}
        errors: Dict[int, Exception] = {}
        while not self.result_queue.empty():
            index, status, payload = self.result_queue.get()
            if status == "success":
                results[index] = payload
            else:
                errors[index] = payload

        if errors:
            first = min(errors)
            log.debug(f"{len(errors)} of {len(items)} fold(s) failed; reporting fold {first}")
            raise errors[first]
        return [results[i] for i in range(len(items))]
