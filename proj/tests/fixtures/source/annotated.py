from typing import Dict, List, Optional

from .models import IDMap, IDMapKey


class IDMapStore:
    def get(self, key: IDMapKey) -> Optional[IDMap]:
        found: Optional[IDMap] = self.items.get(key)
        return found

    def keys(self) -> List[IDMapKey]:
        result: List[IDMapKey] = list(self.items)
        return result


def count_words(text: str, limit=10) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for word in text.split()[:limit]:
        counts[word] = counts.get(word, 0) + 1
    return counts


def ratio(total: float, parts) -> float:
    def inner(x: int) -> int:
        return x
    share = total / max(parts, 1)
    return share
