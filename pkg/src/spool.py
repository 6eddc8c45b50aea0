import json
import logging
import os
import tempfile
from pathlib import Path
from typing import List, Optional, Union

from .gps_fsm import SegmentRecord


class SegmentSpool:
    """
    Temporary store for completed segments, one JSON object per line.

    Without an explicit path the spool lives in a temporary file that is
    removed on `close()`.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None):
        self.logger = logging.getLogger(__name__)
        self._owned = path is None
        if path is None:
            fd, name = tempfile.mkstemp(prefix='segments-', suffix='.ndjson')
            os.close(fd)
            path = name
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.touch(exist_ok=True)
        self.appended = 0

    def append(self, record: SegmentRecord) -> None:
        with open(self.path, 'a', encoding='utf-8') as f:
            f.write(json.dumps(record.to_dict()) + '\n')
        self.appended += 1

    def read(self) -> List[SegmentRecord]:
        records = []
        with open(self.path, 'r', encoding='utf-8') as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(SegmentRecord.from_dict(json.loads(line)))
                except (ValueError, KeyError, TypeError) as e:
                    self.logger.error(f"Skipping corrupt spool line {self.path}:{lineno}: {str(e)}")
        return records

    def drain(self) -> List[SegmentRecord]:
        """Read every spooled segment and empty the store."""
        records = self.read()
        with open(self.path, 'w', encoding='utf-8'):
            pass
        self.logger.debug(f"Drained {len(records)} segments from {self.path}")
        return records

    def close(self) -> None:
        if self._owned and self.path.exists():
            self.path.unlink()

    def __enter__(self) -> 'SegmentSpool':
        return self

    def __exit__(self, *exc) -> None:
        self.close()
