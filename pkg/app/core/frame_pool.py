import logging

import psutil
from PySide6.QtCore import QRunnable, QThreadPool

log = logging.getLogger(__name__)


def default_worker_count() -> int:
    """物理コア数 (取得できなければ論理コア数、最低 1)。"""
    count = psutil.cpu_count(logical=False) or psutil.cpu_count(logical=True) or 1
    return max(1, count)


class FrameWorker(QRunnable):
    """
    1 フレーム分の処理を実行する QRunnable ワーカ。
    結果と例外はワーカ自身に保持し、呼び出し側が完了後に回収する。
    """
    def __init__(self, fn, args: tuple):
        super().__init__()
        self.setAutoDelete(False)
        self.fn = fn
        self.args = args
        self.result = None
        self.error = None

    def run(self):
        try:
            self.result = self.fn(*self.args)
        except Exception as e:  # 例外はスレッドを越えて呼び出し側で再送出する
            self.error = e


class FramePool:
    """
    QThreadPool でフレーム単位の処理を並列に実行するクラス。
    map の結果は投入順に並ぶため、並列度によらず同じ列が返る。
    """
    def __init__(self, max_threads: int = 0):
        self.max_threads = max_threads if max_threads > 0 else default_worker_count()
        self.thread_pool = QThreadPool()
        self.thread_pool.setMaxThreadCount(self.max_threads)
        log.debug(f"FramePool started with {self.max_threads} threads")

    def map(self, fn, arg_list) -> list:
        workers = []
        for args in arg_list:
            worker = FrameWorker(fn, tuple(args))
            workers.append(worker)
            self.thread_pool.start(worker)

        # 全てのワーカの完了を待つ
        self.thread_pool.waitForDone()

        for worker in workers:
            if worker.error is not None:
                log.error(f"Frame worker failed: {worker.error}")
                raise worker.error
        return [worker.result for worker in workers]
