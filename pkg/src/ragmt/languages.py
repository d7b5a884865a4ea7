"""Language codes and pair identifiers used throughout the pipeline."""

from __future__ import annotations

# ISO 639-3 code -> lowercased English name, as inserted into prompts.
LANGUAGE_NAMES: dict[str, str] = {
    "eng": "english",
    "rus": "russian",
    "bak": "bashkir",
    "kaz": "kazakh",
    "kir": "kyrgyz",
    "tat": "tatar",
    "chv": "chuvash",
}

LANG_PAIRS: frozenset[str] = frozenset(
    {
        "rus-bak",
        "rus-kaz",
        "rus-kir",
        "eng-tat",
        "eng-chv",
        # added with the synthetic data
        "rus-tat",
        "eng-kaz",
        "eng-kir",
    }
)


def split_pair(lang_pair: str) -> tuple[str, str]:
    src, sep, tgt = lang_pair.partition("-")
    if not sep or not src or not tgt:
        raise ValueError(f"malformed language pair {lang_pair!r}, expected 'src-tgt'")
    return src, tgt


def language_name(code: str) -> str:
    try:
        return LANGUAGE_NAMES[code]
    except KeyError:
        raise ValueError(f"unknown language code {code!r}") from None
