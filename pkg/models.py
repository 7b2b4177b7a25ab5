"""Report records produced by a scenario run."""
from dataclasses import asdict, dataclass, field, fields


@dataclass
class ThresholdRow:
    threshold: float
    ln: float = None
    success_probability: float = None
    weight_entropy: float = None
    max_cov_distance: float = None
    posterior_weights: list = field(default_factory=list)
    pooled_cov: list = None
    error: str = None
    mc: dict = None
    agreement: dict = None

    @property
    def ok(self):
        return self.error is None and self.ln is not None

    def to_dict(self):
        """Convert to dictionary for JSON output"""
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class RunReport:
    scenario: str
    ln_before: float
    upper_bound: float
    rows: list
    parameters: dict
    channel: list
    status: str
    provenance: dict
    notes: list = field(default_factory=list)

    def __repr__(self):
        return f'<RunReport {self.scenario} {self.status}>'

    @property
    def ln_after(self):
        return [(row.threshold, row.ln, row.success_probability) for row in self.rows if row.ok]

    @property
    def gaussification(self):
        return [(row.threshold, row.weight_entropy, row.max_cov_distance) for row in self.rows if row.ok]

    @property
    def exit_code(self):
        return {"OK": 0, "DEGENERATE": 3, "FAILED": 4}[self.status]

    def row_at(self, threshold):
        for row in self.rows:
            if row.threshold == threshold:
                return row
        raise KeyError(threshold)

    def to_dict(self):
        """Convert to dictionary for JSON output"""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["rows"] = [row.to_dict() for row in self.rows]
        return data

    @classmethod
    def from_dict(cls, data):
        payload = dict(data)
        payload["rows"] = [ThresholdRow.from_dict(row) for row in data.get("rows", [])]
        return cls(**{f.name: payload[f.name] for f in fields(cls) if f.name in payload})
