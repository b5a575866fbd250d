"""
Disk cache for pre-trained toy teachers.

Pre-training a teacher is the slowest deterministic step of a training
run, and its result depends only on a handful of settings. Weights are
stored under a SHA-256 of those settings so repeated runs (ablations,
seed sweeps over the student) reuse them.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from diskcache import Cache

logger = logging.getLogger(__name__)


class TeacherCache:
    """
    Cache of teacher parameter dictionaries.

    Cache errors are logged and otherwise ignored; a failed lookup simply
    means the teacher is trained again.
    """

    def __init__(self, cache_dir: Optional[Path] = None):
        """
        Initialize cache.

        Args:
            cache_dir: Cache directory (default: ~/.otalign/cache)
        """
        if cache_dir is None:
            cache_dir = Path.home() / ".otalign" / "cache"
        else:
            cache_dir = Path(cache_dir)

        cache_dir.mkdir(parents=True, exist_ok=True)

        self.cache = Cache(str(cache_dir))
        self._hits = 0
        self._misses = 0

    def get(self, settings: Dict[str, Any]) -> Optional[Dict[str, np.ndarray]]:
        """
        Look up teacher weights.

        Args:
            settings: Everything the teacher's training depends on

        Returns:
            Parameter dictionary or None if not cached
        """
        key = self.make_key(settings)
        try:
            result = self.cache.get(key)
            if result is not None:
                self._hits += 1
                logger.debug("Teacher cache hit %s", key[:12])
                return {name: np.array(arr, dtype=np.float64) for name, arr in result.items()}
        except Exception as exc:
            logger.warning("Teacher cache read failed: %s", exc)

        self._misses += 1
        return None

    def set(self, settings: Dict[str, Any], params: Dict[str, np.ndarray]) -> None:
        """Store teacher weights."""
        key = self.make_key(settings)
        try:
            self.cache.set(key, {name: np.array(arr) for name, arr in params.items()})
        except Exception as exc:
            logger.warning("Teacher cache write failed: %s", exc)

    @staticmethod
    def make_key(settings: Dict[str, Any]) -> str:
        """SHA-256 of the canonical JSON of ``settings``."""
        settings_str = json.dumps(settings, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(settings_str.encode()).hexdigest()

    def clear(self) -> None:
        """Clear all cached teachers."""
        self.cache.clear()

    def stats(self) -> Dict[str, Any]:
        """
        Get cache statistics.

        Returns:
            Dict with hits, misses, hit rate, size
        """
        total = self._hits + self._misses
        return {
            "hits": self._hits,
            "misses": self._misses,
            "total_requests": total,
            "hit_rate": self._hits / total if total > 0 else 0.0,
            "cache_size": len(self.cache),
        }

    def close(self) -> None:
        try:
            self.cache.close()
        except Exception:
            pass

    def __del__(self):
        self.close()


__all__ = ["TeacherCache"]
