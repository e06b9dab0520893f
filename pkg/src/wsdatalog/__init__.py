"""Query answering over weakly-sticky Datalog+/- programs."""

from .analysis import ClassReport, classify, compute_ranks, build_dependency_graph, mark_variables
from .chase import (GroundingConfig, GroundProgram, answer_over_ground, certain_answers_oracle, ground_ws,
                    minimal_model, oracle_chase, resumptions_for)
from .errors import (CapExceeded, DisjunctCapExceeded, NotSticky, NotWeaklySticky, ParseError,
                     PreconditionViolated, RuleCapExceeded, SemanticError, UnknownPredicate, WsDatalogError)
from .model import (FILLER, Atom, ConjunctiveQuery, Constant, FrozenNull, FunctionConstant, LabeledNull, Position,
                    Program, Rule, Variable)
from .rewrite import UCQRewriting, emit_sql, evaluate_ucq, hybrid_answer, rewrite_sticky
from .syntax import parse_program, parse_query, parse_source, serialize_program
from .transform import partial_grounding, reduce_rank, weak_variables

__version__ = "0.1.0"
