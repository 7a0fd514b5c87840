"""
Toy text encoder: a learned embedding table over a small fixed vocabulary

The prompt is fixed at configuration time and must contain the keyword
token exactly once; its position locates the keyword slice of c_y.
"""
from dataclasses import dataclass
from typing import List, Sequence

import torch
import torch.nn as nn

from ..utils.errors import PromptError

KEYWORD = "text"
UNKNOWN = "<unk>"

DEFAULT_PROMPT = ("a", "photo", "with", "text")

VOCABULARY = (
    UNKNOWN, "a", "an", "the", "photo", "image", "picture", "of", "with",
    "clear", "sharp", "high", "quality", "detailed", "scene", "sign", "and",
    KEYWORD,
)


@dataclass
class PromptEmbedding:
    """c_y with the location of the keyword slice"""
    tokens: List[int]
    embeddings: torch.Tensor  # L x e
    tex_index: int

    @property
    def length(self) -> int:
        return len(self.tokens)

    @property
    def keyword_embedding(self) -> torch.Tensor:
        return self.embeddings[self.tex_index]


def locate_keyword(prompt: Sequence[str]) -> int:
    """Position of the keyword; raises PromptError unless it occurs exactly once"""
    words = [w.lower() for w in prompt]
    count = words.count(KEYWORD)
    if count != 1:
        raise PromptError(f"Prompt must contain '{KEYWORD}' exactly once, found {count} in {list(prompt)}")
    return words.index(KEYWORD)


class TextEncoder(nn.Module):
    """
    Embedding table plus learned positional offsets

    Args:
        embed_dim: Width e of each token embedding
        max_length: Longest prompt supported
    """

    def __init__(self, embed_dim: int = 32, max_length: int = 16):
        super().__init__()
        self.vocab = {word: i for i, word in enumerate(VOCABULARY)}
        self.max_length = max_length
        self.token_embedding = nn.Embedding(len(VOCABULARY), embed_dim)
        self.position_embedding = nn.Parameter(torch.randn(max_length, embed_dim) * 0.02)

    def tokenize(self, prompt: Sequence[str]) -> List[int]:
        return [self.vocab.get(w.lower(), self.vocab[UNKNOWN]) for w in prompt]

    def embed_prompt(self, prompt: Sequence[str] = DEFAULT_PROMPT) -> PromptEmbedding:
        tex_index = locate_keyword(prompt)
        if len(prompt) > self.max_length:
            raise PromptError(f"Prompt longer than {self.max_length} tokens")
        tokens = self.tokenize(prompt)
        ids = torch.tensor(tokens, dtype=torch.long, device=self.position_embedding.device)
        embeddings = self.token_embedding(ids) + self.position_embedding[:len(tokens)]
        return PromptEmbedding(tokens=tokens, embeddings=embeddings, tex_index=tex_index)

    def forward(self, prompt: Sequence[str] = DEFAULT_PROMPT) -> PromptEmbedding:
        return self.embed_prompt(prompt)
