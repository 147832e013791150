from typing import Dict, Iterable, Sequence, Tuple


def fmt(value: float) -> str:
    """Fixed-precision coordinate; keeps output byte-identical across platforms"""
    text = f"{value:.3f}"
    return "0.000" if text == "-0.000" else text


class SVG:
    """Minimal SVG 1.1 document builder writing elements in call order"""

    def __init__(self):
        self.svg = ""

    def header(self, width: float, height: float, title: str = ""):
        self.svg += f"""<?xml version="1.0" encoding="UTF-8" standalone="no"?>
<!DOCTYPE svg PUBLIC "-//W3C//DTD SVG 1.1//EN" "http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd">
<svg version="1.1" width="{fmt(width)}" height="{fmt(height)}" viewBox="0 0 {fmt(width)} {fmt(height)}" xmlns="http://www.w3.org/2000/svg">
"""
        if title:
            self.svg += f"<title>{title}</title>\n"

    def style(self, css: str):
        self.svg += f"<style type=\"text/css\"><![CDATA[\n{css}]]></style>\n"

    def group_start(self, attr: Dict[str, str]):
        g_attr = [f'{key}="{value}"' for key, value in attr.items()]
        self.svg += f'<g {" ".join(g_attr)}>\n'

    def group_end(self):
        self.svg += '</g>\n'

    def filled_rectangle(self, x1: float, y1: float, x2: float, y2: float, fill: str, extra: str = ""):
        extra = f" {extra}" if extra else ""
        self.svg += (f'<rect x="{fmt(x1)}" y="{fmt(y1)}" width="{fmt(x2 - x1)}" '
                     f'height="{fmt(y2 - y1)}" fill="{fill}"{extra}/>\n')

    def polygons_path(self, polygons: Iterable[Sequence[Tuple[float, float]]], extra: str = ""):
        """All polygons as closed subpaths of one path element"""
        parts = []
        for points in polygons:
            head, *tail = points
            parts.append(f"M{fmt(head[0])} {fmt(head[1])}" + "".join(f"L{fmt(x)} {fmt(y)}" for x, y in tail) + "Z")
        if parts:
            extra = f" {extra}" if extra else ""
            self.svg += f'<path d="{"".join(parts)}"{extra}/>\n'

    def segments_path(self, segments: Iterable[Tuple[float, float, float, float]], extra: str = ""):
        parts = [f"M{fmt(x1)} {fmt(y1)}L{fmt(x2)} {fmt(y2)}" for x1, y1, x2, y2 in segments]
        if parts:
            extra = f" {extra}" if extra else ""
            self.svg += f'<path d="{"".join(parts)}"{extra}/>\n'

    def text(self, x: float, y: float, string: str, extra: str = ""):
        extra = f" {extra}" if extra else ""
        self.svg += f'<text x="{fmt(x)}" y="{fmt(y)}"{extra}>{string}</text>\n'

    def get_svg(self) -> str:
        return f"{self.svg}</svg>\n"
