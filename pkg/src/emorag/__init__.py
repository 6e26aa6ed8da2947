"""Emotion-aware memory retrieval for role-playing agents."""
from .embedding import HashingEmbedder, SemanticVector, embed, semantic_distance
from .emotion import DIMENSIONS, EmotionVector, emotion_distance, parse_emotion_response, score_emotion
from .errors import (
    AuthError,
    BackendError,
    BackendTimeoutError,
    DimensionError,
    DuplicateIdError,
    EmoRagError,
    FormatError,
    MissingLabelError,
    MissingVariableError,
    ParseError,
    UncachedVectorError,
    UnknownCharacterError,
)
from .gateway import BackendConfig, ChatRequest, Message, MockChatBackend, OpenAICompatibleClient, chat, embed_batch
from .personality import Instrument, PersonalityLabel
from .pipeline import Backends, respond
from .prompts import PromptTemplate, TemplateRegistry, build_generation_prompt, render
from .retrieval import (
    Query,
    RetrievalStrategy,
    ScoredFragment,
    Variant,
    combine_add,
    combine_mul,
    encode_query,
    retrieve,
    sequential_rerank,
)
from .store import (
    CharacterProfile,
    MemoryFragment,
    MemoryUnit,
    load_memory,
    load_profiles,
    precompute_vectors,
    save_memory,
    save_profiles,
)

__version__ = "0.1.0"
