from emorag.embedding import SemanticVector
from emorag.emotion import EmotionVector
from emorag.retrieval import Query
from emorag.store import MemoryFragment, MemoryUnit


def make_fragment(fid, sem=None, emo=None, text=None, character_id="c1"):
    return MemoryFragment(
        fid,
        character_id,
        text or f"fragment {fid}",
        SemanticVector(tuple(sem)) if sem is not None else None,
        EmotionVector(*emo) if emo is not None else None,
    )


def unit_from_spec(frags):
    return MemoryUnit(tuple(make_fragment(fid, s, e) for fid, s, e in frags))


def query_from(sem, emo, text="query"):
    return Query(text, SemanticVector(tuple(sem)), EmotionVector(*emo))


def pad8(*values):
    return tuple(list(values) + [0.0] * (8 - len(values)))
