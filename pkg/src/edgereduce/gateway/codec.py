"""gzip (RFC 1952) wrapper used by the lossless strategy."""
import gzip
import zlib

from ..errors import CorruptGzip

DEFAULT_LEVEL = 6  # GNU gzip's default


def gzip_compress(data: bytes, level: int = DEFAULT_LEVEL) -> bytes:
    # mtime=0 keeps the output a pure function of the input
    return gzip.compress(bytes(data), compresslevel=level, mtime=0)


def gzip_decompress(data: bytes) -> bytes:
    try:
        return gzip.decompress(bytes(data))
    except (gzip.BadGzipFile, EOFError, zlib.error, OSError) as exc:
        raise CorruptGzip(f"corrupt gzip stream: {exc}") from None
