#!/usr/bin/env python3
"""
Cut long tracks into 10-35 s pre-training clips.

Usage:
    python scripts/crop_tracks.py <manifest> <out_dir> [--seed N] [--splits pretrain]

Every row of the chosen splits (default: pretrain) longer than 35 s is cut
into consecutive clips of random duration; shorter rows are copied through.
Writes WAVs under <out_dir>/audio and a pretrain-only manifest with ids
`<clip_id>#<k>`, keeping the source vocabulary.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from acoustics.audio import crop_clips, load_wav, write_wav  # noqa: E402
from shared.errors import CadenzaError  # noqa: E402
from shared.log import configure_logging  # noqa: E402
from shared.manifest import Manifest, ManifestRow, read_manifest, write_manifest  # noqa: E402


def crop_manifest(manifest, out_dir, seed=0, splits=('pretrain',)):
    out_dir = Path(out_dir)
    audio_dir = out_dir / 'audio'
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    for row in manifest.split(*splits):
        clip = load_wav(manifest.resolve(row), clip_id=row.clip_id)
        for piece in crop_clips(clip, rng):
            name = piece.clip_id.replace('#', '_') + '.wav'
            write_wav(audio_dir / name, piece)
            rows.append(ManifestRow(piece.clip_id, f'audio/{name}', 'pretrain', (), round(piece.duration_s, 3)))
    cropped = Manifest(vocab=manifest.vocab, rows=rows, root=out_dir)
    write_manifest(out_dir / 'manifest.tsv', cropped)
    return cropped


def main():
    parser = argparse.ArgumentParser(description='Crop long tracks into pre-training clips.')
    parser.add_argument('manifest')
    parser.add_argument('out_dir')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--splits', nargs='+', default=['pretrain'])
    args = parser.parse_args()
    configure_logging()

    try:
        cropped = crop_manifest(read_manifest(args.manifest), args.out_dir, args.seed, tuple(args.splits))
    except CadenzaError as e:
        sys.exit(f'{type(e).__name__}: {e}')
    print(f'Wrote {len(cropped.rows)} clips to {args.out_dir}')


if __name__ == '__main__':
    main()
