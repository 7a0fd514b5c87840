"""
Edit distance and the normalized Levenshtein ratio
"""


def levenshtein(a: str, b: str) -> int:
    """Unit-cost insert / delete / substitute distance, O(min(len)) memory"""
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)

    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def lev_ratio(a: str, b: str) -> float:
    """(|a| + |b| - dist) / (|a| + |b|); two empty strings count as identical"""
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    return (total - levenshtein(a, b)) / total
