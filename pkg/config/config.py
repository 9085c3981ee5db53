# config/config.py
import os
import logging
from dotenv import load_dotenv
from pathlib import Path

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


def _optional_int(name: str):
    value = os.getenv(name)
    return int(value) if value not in (None, '') else None


class Config:
    # Runtime settings
    THREADS = _optional_int('MOL_THREADS')
    LOG_LEVEL = os.getenv('MOL_LOG_LEVEL', 'INFO')
    DEFAULT_SEED = int(os.getenv('MOL_DEFAULT_SEED', '0'))

    # Solver caps
    DENSE_SOLVE_CAP = int(os.getenv('MOL_DENSE_SOLVE_CAP', '4096'))
    RBF_DENSE_CAP = int(os.getenv('MOL_RBF_DENSE_CAP', '3000'))
    ITERATIVE_RTOL = float(os.getenv('MOL_ITERATIVE_RTOL', '1e-10'))

    # Benchmark geometry (torus embedding)
    MAJOR_RADIUS = 2.0
    MINOR_RADIUS = 1.0
    SENSOR_ROWS = 26
    SENSOR_COLS = 26

    # Paths
    BASE_DIR = Path(__file__).parent.parent
    DATA_DIR = Path(os.getenv('MOL_DATA_DIR', str(BASE_DIR / 'data')))
    RUNS_DIR = Path(os.getenv('MOL_RUNS_DIR', str(BASE_DIR / 'runs')))

    def ensure_dirs(self):
        """Create the data and run directories if they don't exist."""
        self.DATA_DIR.mkdir(parents=True, exist_ok=True)
        self.RUNS_DIR.mkdir(parents=True, exist_ok=True)

    def apply_thread_limits(self):
        """Cap faiss (OpenMP) and torch intra-op threads at MOL_THREADS."""
        if self.THREADS is None:
            return
        import faiss
        import torch

        faiss.omp_set_num_threads(self.THREADS)
        torch.set_num_threads(self.THREADS)
        logger.info(f"Thread cap applied: {self.THREADS}")
