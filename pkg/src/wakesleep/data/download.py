"""
Fetch the MNIST IDX archives over HTTP.

Transport failures and 5xx responses are retried with exponential back-off;
any other status fails at once. Either way the caller sees a DownloadError
naming the archive URL.
"""

import logging
import os
import time
from pathlib import Path
from typing import Dict, Optional

import requests

from wakesleep.base.exceptions import DownloadError
from wakesleep.base.storage import PathLike, atomic_write_bytes

logger = logging.getLogger(__name__)

DEFAULT_MIRROR = "https://storage.googleapis.com/cvdf-datasets/mnist/"

MNIST_FILES: Dict[str, str] = {
    "train_images": "train-images-idx3-ubyte.gz",
    "train_labels": "train-labels-idx1-ubyte.gz",
    "test_images": "t10k-images-idx3-ubyte.gz",
    "test_labels": "t10k-labels-idx1-ubyte.gz",
}

TRANSIENT_ERRORS = (requests.RequestException, ConnectionError, TimeoutError)


def default_data_dir() -> Path:
    return Path(os.getenv("WAKESLEEP_DATA_DIR", "data"))


def _get(url: str, timeout: float) -> bytes:
    response = requests.get(url, timeout=timeout)
    if response.status_code >= 500:
        response.raise_for_status()
    if response.status_code != 200:
        raise DownloadError(
            f"GET {url} returned {response.status_code}",
            status_code=response.status_code,
            details={"url": url, "attempts": 1},
        )
    return response.content


def download_archive(
    url: str,
    timeout: float = 30.0,
    max_retries: int = 3,
    base_delay: float = 1.0,
    backoff_factor: float = 2.0,
) -> bytes:
    """
    Body of ``url``, waiting ``base_delay·backoff_factor**i`` seconds before
    retry i. Gives up after ``max_retries`` retries.
    """
    attempts = max_retries + 1
    archive = url.rsplit("/", 1)[-1]
    for attempt in range(1, attempts):
        try:
            return _get(url, timeout)
        except TRANSIENT_ERRORS as e:
            delay = base_delay * backoff_factor ** (attempt - 1)
            logger.warning(f"Fetching {archive} failed ({e}); attempt {attempt}/{attempts}, next in {delay:.1f}s")
            time.sleep(delay)
    try:
        return _get(url, timeout)
    except TRANSIENT_ERRORS as e:
        status = getattr(getattr(e, "response", None), "status_code", None)
        logger.error(f"Giving up on {archive} after {attempts} attempts: {e}")
        raise DownloadError(
            f"Could not fetch {url}: {e}",
            status_code=status,
            details={"url": url, "attempts": attempts},
        ) from e


def fetch_mnist(
    data_dir: Optional[PathLike] = None,
    mirror: Optional[str] = None,
    max_retries: int = 3,
    timeout: float = 30.0,
) -> Dict[str, Path]:
    """Download any missing MNIST archive into ``data_dir``; returns the local path of each."""
    data_dir = Path(data_dir) if data_dir is not None else default_data_dir()
    mirror = mirror or os.getenv("WAKESLEEP_MNIST_MIRROR", DEFAULT_MIRROR)
    if not mirror.endswith("/"):
        mirror += "/"
    paths: Dict[str, Path] = {}
    for key, filename in MNIST_FILES.items():
        target = data_dir / filename
        paths[key] = target
        if target.exists():
            logger.debug(f"{target} already present")
            continue
        url = mirror + filename
        logger.info(f"Fetching {url}")
        atomic_write_bytes(target, download_archive(url, timeout=timeout, max_retries=max_retries))
    return paths
