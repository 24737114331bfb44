"""Shared token vocabulary: special, class, coordinate-bin and visual id ranges.

All three stage models predict over the same 560-token vocabulary; segment
tags restrict which range is legal at a given position.
"""

from dataclasses import dataclass

from .errors import ContractError

PAD = 0
MASK = 1
SEP = 2
BOS = 3

# segment tags carried alongside token ids
SEG_SPECIAL = 0
SEG_CLASS = 1
SEG_COORD = 2
SEG_VISUAL = 3

NUM_SEGMENTS = 4


@dataclass(frozen=True)
class Vocabulary:
    """Contiguous id ranges over one flat vocabulary.

    Layout: 4 specials, then `num_classes` class tokens, then `coord_bins`
    coordinate-bin tokens shared by x/y/w/h, then `visual_codes` patch-code
    tokens.
    """

    num_classes: int = 12
    coord_bins: int = 32
    visual_codes: int = 512

    @property
    def class_offset(self) -> int:
        return 4

    @property
    def coord_offset(self) -> int:
        return 4 + self.num_classes

    @property
    def visual_offset(self) -> int:
        return 4 + self.num_classes + self.coord_bins

    @property
    def size(self) -> int:
        return 4 + self.num_classes + self.coord_bins + self.visual_codes

    def class_token(self, class_id: int) -> int:
        if not 0 <= class_id < self.num_classes:
            raise ContractError(f"class id {class_id} outside 0..{self.num_classes - 1}")
        return self.class_offset + class_id

    def coord_token(self, bin_id: int) -> int:
        if not 0 <= bin_id < self.coord_bins:
            raise ContractError(f"coordinate bin {bin_id} outside 0..{self.coord_bins - 1}")
        return self.coord_offset + bin_id

    def visual_token(self, code: int) -> int:
        if not 0 <= code < self.visual_codes:
            raise ContractError(f"visual code {code} outside 0..{self.visual_codes - 1}")
        return self.visual_offset + code

    def class_of(self, token: int) -> int:
        if not self.class_offset <= token < self.coord_offset:
            raise ContractError(f"token {token} is not a class token")
        return token - self.class_offset

    def coord_of(self, token: int) -> int:
        if not self.coord_offset <= token < self.visual_offset:
            raise ContractError(f"token {token} is not a coordinate token")
        return token - self.coord_offset

    def visual_of(self, token: int) -> int:
        if not self.visual_offset <= token < self.size:
            raise ContractError(f"token {token} is not a visual token")
        return token - self.visual_offset

    def segment_range(self, segment: int) -> tuple[int, int]:
        """Half-open id range legal for a segment tag."""
        if segment == SEG_SPECIAL:
            return 0, 4
        if segment == SEG_CLASS:
            return self.class_offset, self.coord_offset
        if segment == SEG_COORD:
            return self.coord_offset, self.visual_offset
        if segment == SEG_VISUAL:
            return self.visual_offset, self.size
        raise ContractError(f"unknown segment tag {segment}")


DEFAULT_VOCAB = Vocabulary()
