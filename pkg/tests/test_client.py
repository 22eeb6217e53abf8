"""Tests for MirrorClient."""

from __future__ import annotations

import gzip
import struct
from pathlib import Path
from unittest.mock import AsyncMock

import httpx
import pytest

from snn_fault_sim.client import MirrorClient, MirrorClientError
from snn_fault_sim.config import Settings
from snn_fault_sim.dataset import DatasetFormatError
from snn_fault_sim.models import Workload
from tests.conftest import quadrant_images

MIRROR = "https://mirror.example/mnist/"


@pytest.fixture
def settings(tmp_path: Path) -> Settings:
    """Create test settings pointing at a fake mirror."""
    return Settings(_env_file=None, data_dir=tmp_path / "data", mnist_mirror=MIRROR)


def _idx_payloads() -> dict[str, bytes]:
    train, test = quadrant_images(8), quadrant_images(4)

    def images(data: bytes, count: int) -> bytes:
        return struct.pack(">IIII", 0x00000803, count, 8, 8) + data

    def labels(data: bytes, count: int) -> bytes:
        return struct.pack(">II", 0x00000801, count) + data

    return {
        "train-images-idx3-ubyte": images(train.images.tobytes(), 8),
        "train-labels-idx1-ubyte": labels(train.labels.tobytes(), 8),
        "t10k-images-idx3-ubyte": images(test.images.tobytes(), 4),
        "t10k-labels-idx1-ubyte": labels(test.labels.tobytes(), 4),
    }


def _response(status_code: int, content: bytes = b"") -> httpx.Response:
    return httpx.Response(status_code=status_code, content=content, request=httpx.Request("GET", MIRROR))


def _mirror(payloads: dict[str, bytes]) -> AsyncMock:
    async def get(url: str) -> httpx.Response:
        name = url.removeprefix(MIRROR).removesuffix(".gz")
        if name not in payloads:
            return _response(404)
        return _response(200, gzip.compress(payloads[name]))

    client = AsyncMock(spec=httpx.AsyncClient)
    client.get = AsyncMock(side_effect=get)
    return client


class TestDownload:
    """Tests for MirrorClient.download."""

    @pytest.mark.asyncio
    async def test_decompresses_body(self, settings: Settings) -> None:
        """Verify the gzip body is returned decompressed."""
        client = MirrorClient(settings, client=_mirror({"file": b"payload"}))
        assert await client.download(f"{MIRROR}file.gz") == b"payload"

    @pytest.mark.asyncio
    async def test_http_status_error(self, settings: Settings) -> None:
        """Verify a 404 raises MirrorClientError with the status."""
        client = MirrorClient(settings, client=_mirror({}))
        with pytest.raises(MirrorClientError, match="404"):
            await client.download(f"{MIRROR}missing.gz")

    @pytest.mark.asyncio
    async def test_transport_error(self, settings: Settings) -> None:
        """Verify connection failures raise MirrorClientError."""
        mock = AsyncMock(spec=httpx.AsyncClient)
        mock.get = AsyncMock(side_effect=httpx.ConnectError("refused"))
        client = MirrorClient(settings, client=mock)
        with pytest.raises(MirrorClientError, match="HTTP error"):
            await client.download(f"{MIRROR}file.gz")

    @pytest.mark.asyncio
    async def test_not_gzip(self, settings: Settings) -> None:
        """Verify a plain body is refused."""
        mock = AsyncMock(spec=httpx.AsyncClient)
        mock.get = AsyncMock(return_value=_response(200, b"<html>moved</html>"))
        client = MirrorClient(settings, client=mock)
        with pytest.raises(MirrorClientError, match="not a gzip file"):
            await client.download(f"{MIRROR}file.gz")


class TestFetchWorkload:
    """Tests for MirrorClient.fetch_workload."""

    @pytest.mark.asyncio
    async def test_writes_four_files(self, settings: Settings) -> None:
        """Verify both splits are downloaded, decompressed and written."""
        mock = _mirror(_idx_payloads())
        async with MirrorClient(settings, client=mock) as client:
            written = await client.fetch_workload(Workload.MNIST)
        assert len(written) == 4
        folder = settings.data_dir / "mnist"
        assert sorted(path.name for path in folder.iterdir()) == sorted(_idx_payloads())
        assert mock.get.call_count == 4

    @pytest.mark.asyncio
    async def test_keeps_existing_files(self, settings: Settings) -> None:
        """Verify a second fetch downloads nothing unless forced."""
        mock = _mirror(_idx_payloads())
        client = MirrorClient(settings, client=mock)
        await client.fetch_workload(Workload.MNIST)
        assert await client.fetch_workload(Workload.MNIST) == []
        assert mock.get.call_count == 4
        assert len(await client.fetch_workload(Workload.MNIST, force=True)) == 4

    @pytest.mark.asyncio
    async def test_broken_mirror_reported(self, settings: Settings) -> None:
        """Verify a mirror serving mismatched files fails validation."""
        payloads = _idx_payloads()
        payloads["train-labels-idx1-ubyte"] = struct.pack(">II", 0x00000801, 1) + b"\x00"
        client = MirrorClient(settings, client=_mirror(payloads))
        with pytest.raises(DatasetFormatError, match="does not match"):
            await client.fetch_workload(Workload.MNIST)
