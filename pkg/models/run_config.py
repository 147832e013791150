from dataclasses import dataclass, field
from typing import List, Optional


@dataclass
class RunConfig:
    """Everything one CLI invocation needs, validated before any computation"""
    command: str
    inputs: List[str] = field(default_factory=list)
    lam: Optional[float] = None
    lambdas_text: Optional[str] = None
    lambdas: List[float] = field(default_factory=list)
    method: str = 'lp'
    stencil: str = 'N16'
    topology: str = 'cubical'
    spacing: float = 1.0
    threshold: int = 128
    resolution: float = 64.0
    out: Optional[str] = None
    svg: Optional[str] = None
    csv: Optional[str] = None
    seed: int = 0
    threads: int = 1
    quiet: bool = False
    log_level: str = 'INFO'

    @property
    def input(self) -> Optional[str]:
        return self.inputs[0] if self.inputs else None

    def output_paths(self) -> List[str]:
        return [p for p in (self.out, self.svg, self.csv) if p and p != '-']
