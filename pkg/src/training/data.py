"""
Torch view of a synthesized dataset
"""
from pathlib import Path
from typing import Dict, List, Optional, Union

import torch
from torch.utils.data import DataLoader, Dataset

from ..synthesis.dataset import load_triplet, read_manifest, select_split
from ..utils.errors import DatasetIOError
from ..utils.imaging import to_tensor
from ..utils.logger import get_logger

logger = get_logger()


class TripletDataset(Dataset):
    """
    (x_L, x_H, s) triplets of one manifest split, decoded once and kept in memory

    Items are dicts of C x H x W float32 tensors plus the sample id.
    """

    def __init__(self, root: Union[str, Path], split: Optional[str] = 'train'):
        self.root = Path(root)
        manifest = read_manifest(self.root)
        self.entries: List[Dict] = select_split(manifest, split)
        if not self.entries:
            raise DatasetIOError(f"No '{split}' samples in {self.root}")
        self.scale = int(manifest.get('scale', 4))
        self._items = [self._load(e) for e in self.entries]
        logger.info(f"Loaded {len(self._items)} '{split}' samples from {self.root}")

    def _load(self, entry: Dict) -> Dict:
        triplet = load_triplet(self.root, entry)
        return {
            'id': entry['id'],
            'x_L': to_tensor(triplet.x_L)[0],
            'x_H': to_tensor(triplet.x_H)[0],
            's': to_tensor(triplet.s)[0],
        }

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, index: int) -> Dict:
        return self._items[index]


def make_loader(dataset: Dataset, batch_size: int = 1, seed: int = 0, shuffle: bool = True) -> DataLoader:
    """Single-process loader whose order depends only on seed"""
    generator = torch.Generator()
    generator.manual_seed(seed)
    return DataLoader(dataset, batch_size=batch_size, shuffle=shuffle, num_workers=0,
                      generator=generator, drop_last=False)
