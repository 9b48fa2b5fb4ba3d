"""Inter-patient record split and AAMI beat classes for the MIT-BIH database."""

DS1 = (101, 106, 108, 109, 112, 114, 115, 116, 118, 119, 122,
       124, 201, 203, 205, 207, 208, 209, 215, 220, 223, 230)
DS2 = (100, 103, 105, 111, 113, 117, 121, 123, 200, 202, 210,
       212, 213, 214, 219, 221, 222, 228, 231, 232, 233, 234)
PACED = (102, 104, 107, 217)

AAMI_GROUPS = {
    "N": ("N", "L", "R"),
    "S": ("e", "j", "A", "a", "J", "S"),
    "V": ("V", "E"),
    "F": ("F",),
    "Q": ("Q", "/", "f"),
}
_SYMBOL_CLASS = {s: c for c, syms in AAMI_GROUPS.items() for s in syms}

BEAT_SYMBOLS = frozenset(_SYMBOL_CLASS)
EXCLUDED = "excluded"

# Published per-class totals for DS1 and DS2.
REFERENCE_COUNTS = {
    "N": (45626, 43848),
    "S": (3778, 3208),
    "V": (975, 2043),
    "F": (413, 388),
    "Q": (8, 7),
}


def split_inter_patient() -> tuple[tuple[int, ...], tuple[int, ...]]:
    return DS1, DS2


def map_aami(symbol: str) -> str:
    """AAMI class of an annotation symbol; non-beat symbols map to ``"excluded"``."""
    return _SYMBOL_CLASS.get(symbol, EXCLUDED)
