"""Dataset ingestion, schema inference, encoding and sharding."""

from .encoding import DecodeStats, EncodedMatrix, decode, encode, write_csv
from .schema import (
    ColumnSpec,
    IngestReport,
    MISSING_TOKENS,
    TableSchema,
    drop_missing,
    infer_schema,
    read_csv,
)
from .sharding import ShardSet, ShardView, partition_shards

__all__ = [
    "ColumnSpec",
    "DecodeStats",
    "EncodedMatrix",
    "IngestReport",
    "MISSING_TOKENS",
    "ShardSet",
    "ShardView",
    "TableSchema",
    "decode",
    "drop_missing",
    "encode",
    "infer_schema",
    "partition_shards",
    "read_csv",
    "write_csv",
]
