import csv
from dataclasses import dataclass
from typing import IO, List, Optional, Sequence, Tuple

import numpy as np

from ..data import StagnationCase
from ..diagnostics import IterationDiagnostics
from ..solvers import IterationSnapshot


@dataclass(frozen=True)
class IterationRecord:
    """
    One CSV row. Residual norms are relative to the column norms of F0;
    stagnated holds 0-based column indices.
    """

    j: int
    gmres_res: Tuple[float, ...]
    breakdown_p: int
    fom_res: Optional[Tuple[float, ...]] = None
    fom_generalized: Optional[bool] = None
    rank_r: Optional[int] = None
    case: Optional[StagnationCase] = None
    stagnated: Optional[Tuple[int, ...]] = None
    sines: Optional[Tuple[float, ...]] = None
    cosines: Optional[Tuple[float, ...]] = None
    angles: Optional[Tuple[float, ...]] = None
    init_sines: Optional[Tuple[float, ...]] = None
    trig_residual: Optional[float] = None
    gap_residual: Optional[float] = None
    nilpotent_residual: Optional[float] = None
    angle_deviation: Optional[float] = None

    def verification_residuals(self) -> List[float]:
        return [
            v
            for v in (
                self.trig_residual,
                self.gap_residual,
                self.nilpotent_residual,
                self.angle_deviation,
            )
            if v is not None
        ]


def _floats(values) -> Tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(values).ravel())


def build_record(
    snapshot: IterationSnapshot, diagnostics: Optional[IterationDiagnostics] = None
) -> IterationRecord:
    pair = snapshot.pair
    fields = dict(
        j=snapshot.j,
        gmres_res=_floats(pair.gmres_relative),
        breakdown_p=snapshot.state.breakdown_at(snapshot.j),
    )
    if pair.fom_relative is not None:
        fields.update(
            fom_res=_floats(pair.fom_relative),
            fom_generalized=pair.fom_is_generalized,
        )
    if diagnostics is not None:
        report = diagnostics.report
        fields.update(
            rank_r=report.rank_r,
            case=report.case,
            stagnated=report.stagnated_columns,
            sines=_floats(report.cs.sines),
            cosines=_floats(report.cs.cosines),
            angles=_floats(report.principal_angles_vs_constraint),
            init_sines=_floats(diagnostics.initial_sines),
            trig_residual=diagnostics.trig_residual,
            gap_residual=diagnostics.gap_residual,
            nilpotent_residual=diagnostics.nilpotent_residual,
            angle_deviation=diagnostics.angle_deviation,
        )
    return IterationRecord(**fields)


def csv_header(block_size: int) -> List[str]:
    """
    Column names of iterations.csv for block size L; indexed columns
    run from 1 to L.
    """

    def indexed(prefix):
        return [f"{prefix}_{i}" for i in range(1, block_size + 1)]

    return (
        ["j"]
        + indexed("gmres_res")
        + indexed("fom_res")
        + ["fom_generalized", "rank_r", "case", "stagnated"]
        + indexed("sin")
        + indexed("cos")
        + indexed("angle")
        + indexed("init_sin")
        + [
            "breakdown_p",
            "trig_residual",
            "gap_residual",
            "nilpotent_residual",
            "angle_deviation",
        ]
    )


def format_float(value: Optional[float]) -> str:
    """Scientific notation with 17 significant digits; empty for None."""
    if value is None:
        return ""
    return f"{float(value):.16e}"


def _cells(values: Optional[Sequence[float]], block_size: int) -> List[str]:
    if values is None:
        return [""] * block_size
    return [format_float(v) for v in values]


def record_row(record: IterationRecord, block_size: int) -> List[str]:
    """CSV cells of a record; stagnated columns are written 1-based and ';'-separated."""
    return (
        [str(record.j)]
        + _cells(record.gmres_res, block_size)
        + _cells(record.fom_res, block_size)
        + [
            "" if record.fom_generalized is None else str(int(record.fom_generalized)),
            "" if record.rank_r is None else str(record.rank_r),
            "" if record.case is None else record.case.value,
            "" if record.stagnated is None else ";".join(str(i + 1) for i in record.stagnated),
        ]
        + _cells(record.sines, block_size)
        + _cells(record.cosines, block_size)
        + _cells(record.angles, block_size)
        + _cells(record.init_sines, block_size)
        + [
            str(record.breakdown_p),
            format_float(record.trig_residual),
            format_float(record.gap_residual),
            format_float(record.nilpotent_residual),
            format_float(record.angle_deviation),
        ]
    )


def write_csv(stream: IO[str], records: Sequence[IterationRecord], block_size: int):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(csv_header(block_size))
    for record in records:
        writer.writerow(record_row(record, block_size))
