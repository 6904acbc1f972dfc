"""Teacher ensemble, residual generator, and student discriminators."""

from .checkpoint import load_checkpoint, pack_checkpoint, save_checkpoint, unpack_checkpoint
from .generator import Generator, generate_batch
from .student import MlpStudent, TransformerStudent, make_student, student_forward
from .teacher import (
    Teacher,
    fit_teacher,
    fit_teacher_ensemble,
    tally_votes,
    teacher_vote,
    teacher_votes,
)

__all__ = [
    "Generator",
    "MlpStudent",
    "Teacher",
    "TransformerStudent",
    "fit_teacher",
    "fit_teacher_ensemble",
    "generate_batch",
    "load_checkpoint",
    "make_student",
    "pack_checkpoint",
    "save_checkpoint",
    "student_forward",
    "tally_votes",
    "teacher_vote",
    "teacher_votes",
    "unpack_checkpoint",
]
