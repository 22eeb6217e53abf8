"""HTTP client for downloading IDX dataset files from public mirrors."""

from __future__ import annotations

import gzip
import logging
import zlib
from pathlib import Path
from typing import Any

import httpx

from snn_fault_sim.config import Settings
from snn_fault_sim.dataset import SPLIT_FILES, load_idx, workload_paths
from snn_fault_sim.errors import SimulationError
from snn_fault_sim.models import Workload

logger = logging.getLogger(__name__)


class MirrorClientError(SimulationError):
    """Raised when a dataset file cannot be downloaded or unpacked."""


class MirrorClient:
    """Async HTTP client for gzip'd IDX files on an MNIST-style mirror.

    Files are written decompressed to ``<data_dir>/<workload>/`` under the
    names ``dataset.load_workload`` expects.
    """

    def __init__(self, settings: Settings, client: httpx.AsyncClient | None = None) -> None:
        self._settings = settings
        self._client = client or httpx.AsyncClient(timeout=settings.download_timeout, follow_redirects=True)

    async def download(self, url: str) -> bytes:
        """Fetch ``url`` and return the decompressed body.

        Raises:
            MirrorClientError: On HTTP errors or a body that is not gzip data.
        """
        try:
            response = await self._client.get(url)
            response.raise_for_status()
        except httpx.HTTPStatusError as exc:
            raise MirrorClientError(f"download of {url} failed with status {exc.response.status_code}") from exc
        except httpx.HTTPError as exc:
            raise MirrorClientError(f"HTTP error during download of {url}: {exc}") from exc
        try:
            return gzip.decompress(response.content)
        except (OSError, EOFError, zlib.error) as exc:
            raise MirrorClientError(f"{url} is not a gzip file: {exc}") from exc

    async def fetch_workload(self, workload: Workload, data_dir: Path | None = None, force: bool = False) -> list[Path]:
        """Download the train and test splits of ``workload``.

        Existing files are kept unless ``force`` is set. Each downloaded pair is
        parsed once so a broken mirror is reported here rather than mid-sweep.

        Returns:
            Paths of the files written.
        """
        data_dir = Path(data_dir or self._settings.data_dir)
        base_url = self._settings.mirror_url(workload).rstrip("/") + "/"
        written: list[Path] = []
        for split in SPLIT_FILES:
            pair = workload_paths(data_dir, workload, split)
            for path in pair:
                if path.exists() and not force:
                    logger.info("Keeping existing %s", path)
                    continue
                logger.info("Downloading %s%s.gz", base_url, path.name)
                payload = await self.download(f"{base_url}{path.name}.gz")
                try:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    path.write_bytes(payload)
                except OSError as exc:
                    raise MirrorClientError(f"cannot write {path}: {exc}") from exc
                written.append(path)
            dataset = load_idx(*pair)
            logger.info("%s %s split: %d images", workload.value, split, len(dataset))
        return written

    async def close(self) -> None:
        """Close the underlying HTTP client."""
        await self._client.aclose()

    async def __aenter__(self) -> "MirrorClient":
        return self

    async def __aexit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        await self.close()
