"""Documentation retrieval: overlapping chunking, embeddings, flat vector index.

The corpus is a directory of plain-text/Markdown manual excerpts.  Documents
are split into overlapping character windows, embedded, and stored in a flat
exhaustive index queried by cosine similarity.  Exact search is fast and
testable at single-aircraft-manual scale, so there is no approximate
nearest-neighbor structure.

Two embedding providers are supported: a remote provider speaking a generic
embeddings HTTP contract, and a deterministic local token-hashing provider
for offline use and tests.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

log = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 1200
DEFAULT_OVERLAP = 200
DEFAULT_TOP_K = 10
DEFAULT_LOCAL_DIM = 256

INDEX_FORMAT_VERSION = 1


class RetrievalError(Exception):
    """Base class for retrieval errors."""


class InvalidChunkParams(RetrievalError):
    pass


class DimensionMismatch(RetrievalError):
    pass


class ZeroVector(RetrievalError):
    pass


class EmptyInput(RetrievalError):
    pass


class ProviderUnavailable(RetrievalError):
    """Remote embedding transport failure; retryable."""


class EmbedderMismatch(RetrievalError):
    pass


class EmptyCorpus(RetrievalError):
    pass


class CorpusReadError(RetrievalError):
    pass


class UnsupportedVersion(RetrievalError):
    pass


class CorruptIndex(RetrievalError):
    pass


class IndexSealed(RetrievalError):
    pass


class IndexNotSealed(RetrievalError):
    pass


@dataclass(frozen=True)
class DocumentChunk:
    """A contiguous character window of one source document."""

    doc_id: str
    chunk_index: int
    char_start: int
    char_end: int
    text: str


@dataclass(frozen=True)
class ScoredChunk:
    chunk: DocumentChunk
    score: float


def chunk_document(
    doc_id: str,
    text: str,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
) -> list[DocumentChunk]:
    """Split text into overlapping windows of at most chunk_size characters.

    Consecutive chunks overlap by exactly `overlap` characters (the final
    chunk may overlap more); the final chunk always ends at len(text).
    Empty text yields no chunks.
    """
    if chunk_size <= 0 or overlap < 0 or overlap >= chunk_size:
        raise InvalidChunkParams(
            f"need chunk_size > overlap >= 0, got chunk_size={chunk_size} overlap={overlap}"
        )
    n = len(text)
    if n == 0:
        return []
    stride = chunk_size - overlap
    count = math.ceil(max(1, n - overlap) / stride)
    chunks = []
    for i in range(count):
        start = i * stride
        end = min(start + chunk_size, n)
        chunks.append(
            DocumentChunk(doc_id=doc_id, chunk_index=i, char_start=start, char_end=end, text=text[start:end])
        )
    return chunks


def cosine_similarity(a: list[float], b: list[float]) -> float:
    """Cosine of the angle between two vectors, in [-1, 1] up to rounding."""
    if len(a) != len(b):
        raise DimensionMismatch(f"dim {len(a)} vs {len(b)}")
    dot = 0.0
    norm_a_sq = 0.0
    norm_b_sq = 0.0
    for x, y in zip(a, b):
        dot += x * y
        norm_a_sq += x * x
        norm_b_sq += y * y
    if norm_a_sq == 0.0 or norm_b_sq == 0.0:
        raise ZeroVector("cosine similarity undefined for the zero vector")
    return dot / (math.sqrt(norm_a_sq) * math.sqrt(norm_b_sq))


_TOKEN_RE = re.compile(r"[^0-9a-z]+")
_HASH_KEY = b"leraat-embed-v1"


def _token_bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=_HASH_KEY).digest()
    return int.from_bytes(digest, "big") % dim


class LocalHashingEmbedder:
    """Deterministic offline embedder: hashed bag-of-tokens, L2-normalized.

    Lowercases, splits on non-alphanumerics, hashes each token into one of
    `dim` buckets with a fixed keyed hash, accumulates counts, normalizes.
    """

    def __init__(self, dim: int = DEFAULT_LOCAL_DIM):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.embedder_id = f"local-hash-{dim}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts or any(not t for t in texts):
            raise EmptyInput("embed requires a non-empty list of non-empty strings")
        return [self._embed_one(t) for t in texts]

    def _embed_one(self, text: str) -> list[float]:
        counts = [0.0] * self.dim
        tokens = [t for t in _TOKEN_RE.split(text.lower()) if t]
        if not tokens:
            # Text with no alphanumeric content still gets a deterministic unit vector.
            counts[_token_bucket("", self.dim)] = 1.0
            return counts
        for token in tokens:
            counts[_token_bucket(token, self.dim)] += 1.0
        norm = math.sqrt(sum(c * c for c in counts))
        return [c / norm for c in counts]


class RemoteEmbedder:
    """Embedding provider speaking the generic embeddings HTTP contract.

    POST {base_url} with {"model": ..., "input": [...]} and read vectors from
    {"data": [{"embedding": [...]}, ...]}.  Transport failures and 5xx
    responses are retried; exhaustion raises ProviderUnavailable.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout_s: float = 30.0,
        max_attempts: int = 3,
        retry_backoff_s: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url
        self.model = model
        self.embedder_id = f"remote:{model}"
        self.dim: int | None = None
        self._max_attempts = max_attempts
        self._backoff_s = retry_backoff_s
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout_s, headers=headers, transport=transport)

    def embed(self, texts: list[str]) -> list[list[float]]:
        if not texts or any(not t for t in texts):
            raise EmptyInput("embed requires a non-empty list of non-empty strings")
        body = {"model": self.model, "input": list(texts)}
        last_error: Exception | None = None
        for attempt in range(1, self._max_attempts + 1):
            try:
                response = self._client.post(self.base_url, json=body)
            except httpx.TransportError as exc:
                last_error = exc
                log.warning("embedding attempt %d/%d failed: %s", attempt, self._max_attempts, exc)
            else:
                if response.status_code >= 500:
                    last_error = RetrievalError(f"server error {response.status_code}")
                    log.warning(
                        "embedding attempt %d/%d got status %d",
                        attempt, self._max_attempts, response.status_code,
                    )
                else:
                    return self._parse_response(response, expected=len(texts))
            if attempt < self._max_attempts:
                time.sleep(self._backoff_s * attempt)
        raise ProviderUnavailable(
            f"embedding provider unreachable after {self._max_attempts} attempts: {last_error}"
        )

    def _parse_response(self, response: httpx.Response, expected: int) -> list[list[float]]:
        if response.status_code != 200:
            raise ProviderUnavailable(f"embedding provider rejected request: {response.status_code}")
        try:
            data = response.json()["data"]
            vectors = [[float(x) for x in item["embedding"]] for item in data]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderUnavailable(f"malformed embeddings response: {exc}") from None
        if len(vectors) != expected:
            raise ProviderUnavailable(f"expected {expected} vectors, got {len(vectors)}")
        if vectors and self.dim is None:
            self.dim = len(vectors[0])
        return vectors


class VectorIndex:
    """Flat exhaustive index of (chunk, vector) entries.

    Entries are append-only during a build; the index must be sealed before
    querying and is immutable afterwards.
    """

    def __init__(self, dim: int, embedder_id: str, chunk_size: int, overlap: int):
        self.dim = dim
        self.embedder_id = embedder_id
        self.chunk_size = chunk_size
        self.overlap = overlap
        self.entries: list[tuple[DocumentChunk, list[float]]] = []
        self._sealed = False

    @property
    def sealed(self) -> bool:
        return self._sealed

    def add(self, chunk: DocumentChunk, vector: list[float]) -> None:
        if self._sealed:
            raise IndexSealed("cannot add entries to a sealed index")
        if len(vector) != self.dim:
            raise DimensionMismatch(f"vector dim {len(vector)} != index dim {self.dim}")
        self.entries.append((chunk, vector))

    def seal(self) -> "VectorIndex":
        self._sealed = True
        return self

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VectorIndex):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.embedder_id == other.embedder_id
            and self.chunk_size == other.chunk_size
            and self.overlap == other.overlap
            and self.entries == other.entries
        )


def _corpus_files(corpus_dir: Path) -> list[Path]:
    files = [p for p in sorted(corpus_dir.rglob("*")) if p.is_file() and p.suffix in (".txt", ".md")]
    return files


def build_index(
    corpus_dir: str | Path,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_OVERLAP,
    provider=None,
) -> VectorIndex:
    """Chunk and embed every .txt/.md file under corpus_dir into a sealed index.

    doc_id is the path relative to the corpus root.  Any unreadable file
    fails the whole build; no partial index is returned.
    """
    if provider is None:
        provider = LocalHashingEmbedder()
    corpus_dir = Path(corpus_dir)
    files = _corpus_files(corpus_dir)
    if not files:
        raise EmptyCorpus(f"no .txt/.md files under {corpus_dir}")

    documents: list[tuple[str, str]] = []
    for path in files:
        doc_id = path.relative_to(corpus_dir).as_posix()
        try:
            documents.append((doc_id, path.read_text(encoding="utf-8")))
        except (OSError, UnicodeDecodeError) as exc:
            raise CorpusReadError(f"cannot read corpus file {doc_id!r}: {exc}") from None

    index: VectorIndex | None = None
    for doc_id, text in documents:
        chunks = chunk_document(doc_id, text, chunk_size, overlap)
        if not chunks:
            continue
        vectors = provider.embed([c.text for c in chunks])
        if index is None:
            index = VectorIndex(
                dim=len(vectors[0]), embedder_id=provider.embedder_id,
                chunk_size=chunk_size, overlap=overlap,
            )
        for chunk, vector in zip(chunks, vectors):
            index.add(chunk, vector)
    if index is None:
        raise EmptyCorpus(f"corpus under {corpus_dir} contains only empty documents")
    return index.seal()


def query_top_k(
    index: VectorIndex,
    query: str,
    provider,
    k: int = DEFAULT_TOP_K,
) -> list[ScoredChunk]:
    """Exhaustive cosine ranking of the query against every index entry.

    Returns min(k, entries) results sorted by score descending, ties broken
    by (doc_id, chunk_index) ascending.
    """
    if not index.sealed:
        raise IndexNotSealed("index must be sealed before querying")
    if k < 1:
        raise ValueError("k must be >= 1")
    if provider.embedder_id != index.embedder_id:
        raise EmbedderMismatch(
            f"index built with {index.embedder_id!r}, provider is {provider.embedder_id!r}"
        )
    query_vec = provider.embed([query])[0]
    scored = [
        (cosine_similarity(query_vec, vector), chunk) for chunk, vector in index.entries
    ]
    scored.sort(key=lambda item: (-item[0], item[1].doc_id, item[1].chunk_index))
    return [ScoredChunk(chunk=chunk, score=score) for score, chunk in scored[:k]]


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Persist a sealed index as a single JSON document (atomic write)."""
    if not index.sealed:
        raise IndexNotSealed("refusing to persist an unsealed index")
    document = {
        "version": INDEX_FORMAT_VERSION,
        "dim": index.dim,
        "embedder_id": index.embedder_id,
        "chunk_size": index.chunk_size,
        "overlap": index.overlap,
        "entries": [
            {
                "doc_id": chunk.doc_id,
                "chunk_index": chunk.chunk_index,
                "char_start": chunk.char_start,
                "char_end": chunk.char_end,
                "text": chunk.text,
                "vector": vector,
            }
            for chunk, vector in index.entries
        ],
    }
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(document, separators=(",", ":")), encoding="utf-8")
    os.replace(tmp, path)


def load_index(path: str | Path) -> VectorIndex:
    """Load a persisted index; the result is sealed and bit-exact with save."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorruptIndex(f"cannot read index file: {exc}") from None
    try:
        document = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptIndex(f"index file is not valid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise CorruptIndex("index file must contain a JSON object")
    version = document.get("version")
    if version != INDEX_FORMAT_VERSION:
        raise UnsupportedVersion(f"index format version {version!r} is not supported")
    try:
        index = VectorIndex(
            dim=int(document["dim"]),
            embedder_id=str(document["embedder_id"]),
            chunk_size=int(document["chunk_size"]),
            overlap=int(document["overlap"]),
        )
        for entry in document["entries"]:
            chunk = DocumentChunk(
                doc_id=entry["doc_id"],
                chunk_index=entry["chunk_index"],
                char_start=entry["char_start"],
                char_end=entry["char_end"],
                text=entry["text"],
            )
            vector = entry["vector"]
            if not isinstance(vector, list) or len(vector) != index.dim:
                raise CorruptIndex(f"entry vector has wrong dimension for {chunk.doc_id!r}")
            index.add(chunk, [float(x) for x in vector])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptIndex(f"index file structure invalid: {exc}") from None
    return index.seal()


def _provider_from_args(args) -> LocalHashingEmbedder | RemoteEmbedder:
    if args.embedder == "local":
        return LocalHashingEmbedder()
    return RemoteEmbedder(
        base_url=args.remote_url,
        model=args.remote_model,
        api_key=os.environ.get("LERAAT_EMBED_API_KEY"),
    )


def main(argv: list[str] | None = None) -> int:
    """Index CLI: `leraat-index ingest ...` and `leraat-index search ...`."""
    parser = argparse.ArgumentParser(prog="leraat-index", description="Build and query the manual index")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="chunk, embed, and persist a corpus directory")
    ingest.add_argument("--corpus", required=True, help="directory of .txt/.md files")
    ingest.add_argument("--index", required=True, help="output index file")
    ingest.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    ingest.add_argument("--overlap", type=int, default=DEFAULT_OVERLAP)
    ingest.add_argument("--embedder", choices=("local", "remote"), default="local")
    ingest.add_argument("--remote-url", default="")
    ingest.add_argument("--remote-model", default="")

    search = sub.add_parser("search", help="query a persisted index")
    search.add_argument("--index", required=True)
    search.add_argument("--query", required=True)
    search.add_argument("--k", type=int, default=DEFAULT_TOP_K)
    search.add_argument("--embedder", choices=("local", "remote"), default="local")
    search.add_argument("--remote-url", default="")
    search.add_argument("--remote-model", default="")

    args = parser.parse_args(argv)
    try:
        if args.command == "ingest":
            index = build_index(args.corpus, args.chunk_size, args.overlap, _provider_from_args(args))
            save_index(index, args.index)
            print(f"indexed {len(index)} chunks -> {args.index}")
        else:
            index = load_index(args.index)
            results = query_top_k(index, args.query, _provider_from_args(args), k=args.k)
            for rank, result in enumerate(results, start=1):
                print(f"{rank:2d}  {result.score:.4f}  {result.chunk.doc_id}  {result.chunk.chunk_index}")
    except RetrievalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
