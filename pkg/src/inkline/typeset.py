"""Typeset line rasterizer with an embedded 5x7 bitmap face.

The face is original pixel art covering lowercase Latin, digits, and
basic punctuation (uppercase folds to lowercase); embedding it avoids
any dependence on platform fonts, so typeset renders are bit-stable
everywhere. Glyphs are upscaled with hard pixel edges, which is exactly
the look wanted for printed-class training data.
"""

from __future__ import annotations

import numpy as np

from .image import GrayImage

_G = {
    "0": (".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."),
    "1": ("..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "2": (".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"),
    "3": (".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."),
    "4": ("...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."),
    "5": ("#####", "#....", "####.", "....#", "....#", "#...#", ".###."),
    "6": ("..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."),
    "7": ("#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."),
    "8": (".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."),
    "9": (".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."),
    "a": (".....", ".....", ".###.", "....#", ".####", "#...#", ".####"),
    "b": ("#....", "#....", "####.", "#...#", "#...#", "#...#", "####."),
    "c": (".....", ".....", ".###.", "#....", "#....", "#....", ".###."),
    "d": ("....#", "....#", ".####", "#...#", "#...#", "#...#", ".####"),
    "e": (".....", ".....", ".###.", "#...#", "#####", "#....", ".###."),
    "f": ("..##.", ".#..#", ".#...", "###..", ".#...", ".#...", ".#..."),
    "g": (".....", ".####", "#...#", "#...#", ".####", "....#", ".###."),
    "h": ("#....", "#....", "####.", "#...#", "#...#", "#...#", "#...#"),
    "i": ("..#..", ".....", ".##..", "..#..", "..#..", "..#..", ".###."),
    "j": ("...#.", ".....", "..##.", "...#.", "...#.", "#..#.", ".##.."),
    "k": ("#....", "#....", "#..#.", "#.#..", "##...", "#.#..", "#..#."),
    "l": (".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."),
    "m": (".....", ".....", "##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#"),
    "n": (".....", ".....", "####.", "#...#", "#...#", "#...#", "#...#"),
    "o": (".....", ".....", ".###.", "#...#", "#...#", "#...#", ".###."),
    "p": (".....", "####.", "#...#", "#...#", "####.", "#....", "#...."),
    "q": (".....", ".####", "#...#", "#...#", ".####", "....#", "....#"),
    "r": (".....", ".....", "#.##.", "##..#", "#....", "#....", "#...."),
    "s": (".....", ".....", ".####", "#....", ".###.", "....#", "####."),
    "t": (".#...", ".#...", "###..", ".#...", ".#...", ".#..#", "..##."),
    "u": (".....", ".....", "#...#", "#...#", "#...#", "#...#", ".####"),
    "v": (".....", ".....", "#...#", "#...#", "#...#", ".#.#.", "..#.."),
    "w": (".....", ".....", "#.#.#", "#.#.#", "#.#.#", "#.#.#", ".#.#."),
    "x": (".....", ".....", "#...#", ".#.#.", "..#..", ".#.#.", "#...#"),
    "y": (".....", "#...#", "#...#", "#...#", ".####", "....#", ".###."),
    "z": (".....", ".....", "#####", "...#.", "..#..", ".#...", "#####"),
    ".": (".....", ".....", ".....", ".....", ".....", ".##..", ".##.."),
    ",": (".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."),
    "-": (".....", ".....", ".....", ".####", ".....", ".....", "....."),
    "'": ("..#..", "..#..", ".....", ".....", ".....", ".....", "....."),
    ":": (".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."),
    "!": ("..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#.."),
    "?": (".###.", "#...#", "....#", "...#.", "..#..", ".....", "..#.."),
}
_UNKNOWN = ("#####", "#...#", "#...#", "#...#", "#...#", "#...#", "#####")

GLYPH_W, GLYPH_H = 5, 7


def _glyph(ch: str) -> tuple[str, ...] | None:
    if ch == " ":
        return None
    return _G.get(ch.lower(), _UNKNOWN)


def render_text_line_with_boxes(text: str, scale: int = 4, border: int = 4
                                ) -> tuple[GrayImage, list[tuple[str, tuple[float, float, float, float]]]]:
    """Rasterize one text line; also return per-word pixel boxes."""
    if scale < 1 or border < 0:
        raise ValueError("scale must be >= 1 and border >= 0")
    if not text:
        raise ValueError("empty text line")
    advance = (GLYPH_W + 1) * scale
    width = border * 2 + advance * len(text) - scale
    height = border * 2 + GLYPH_H * scale
    img = np.full((height, max(width, 1)), 255, dtype=np.uint8)

    boxes: list[tuple[str, tuple[float, float, float, float]]] = []
    word = ""
    word_x0 = None
    x = border
    for ch in text:
        glyph = _glyph(ch)
        if glyph is None:
            if word:
                boxes.append((word, (word_x0, border, x - scale, border + GLYPH_H * scale)))
                word, word_x0 = "", None
        else:
            if word_x0 is None:
                word_x0 = x
            word += ch
            block = np.array([[pix == "#" for pix in row] for row in glyph], dtype=bool)
            block = np.kron(block, np.ones((scale, scale), dtype=bool))
            region = img[border : border + GLYPH_H * scale, x : x + GLYPH_W * scale]
            region[block] = 0
        x += advance
    if word:
        boxes.append((word, (word_x0, border, x - scale, border + GLYPH_H * scale)))
    return GrayImage(img), boxes


def render_text_line(text: str, scale: int = 4, border: int = 4) -> GrayImage:
    return render_text_line_with_boxes(text, scale, border)[0]


def scale_for_height(target_h: int, border: int = 4) -> int:
    """Largest glyph scale whose line height fits within ``target_h``."""
    return max(1, (target_h - 2 * border) // GLYPH_H)
