"""Synthetic geometry diagrams whose captions state exactly what the picture shows."""
from .caption import CaptionText, UnrecognizedSentence, caption_facts, fact_to_sentence, parse_caption
from .construction import (ConstructionError, DegenerateConstruction, ExhaustedRetries, NumericFailure,
                           Scene, apply_relation, construct_scene, derive_seed, extract_facts,
                           generate_scene, residual, sample_program)
from .dataset import (ConfigError, DatasetRecord, IoFailure, PipelineConfig, SchemaViolation,
                      load_config, read_records, write_records)
from .dsl import (REGISTRY, ArityMismatch, Clause, DslError, DuplicatePoint, RelationDef,
                  RelationRegistry, UnknownRelation, UseBeforeDefinition, parse_program,
                  print_program, validate_clause)
from .facts import canonicalize
from .llm import HttpClient, LlmClient, MockClient, TransportError
from .qa import AnswerParseError, QaPair, RetriesExhausted, build_prompt, generate_qa, parse_final_answer
from .raft import (HookFailure, PerturbingStubGenerator, RaftConfig, RaftReport, ReplayGenerator,
                   ShortCandidateFile, emit_sft_file, refine_epoch, rollout, run_raft, select_best)
from .render import (StyleConfig, SvgDocument, UnresolvedReference, annotation_plan, layout_labels,
                     render_svg)
from .reward import (EmptyInput, RewardBreakdown, RewardWeights, bleu4, caption_reward,
                     composite_reward, reasoning_reward, rouge_l)

__all__ = [
    "AnswerParseError",
    "ArityMismatch",
    "CaptionText",
    "Clause",
    "ConfigError",
    "ConstructionError",
    "DatasetRecord",
    "DegenerateConstruction",
    "DslError",
    "DuplicatePoint",
    "EmptyInput",
    "ExhaustedRetries",
    "HookFailure",
    "HttpClient",
    "IoFailure",
    "LlmClient",
    "MockClient",
    "NumericFailure",
    "PerturbingStubGenerator",
    "PipelineConfig",
    "QaPair",
    "REGISTRY",
    "RaftConfig",
    "RaftReport",
    "RelationDef",
    "RelationRegistry",
    "ReplayGenerator",
    "RetriesExhausted",
    "RewardBreakdown",
    "RewardWeights",
    "Scene",
    "SchemaViolation",
    "ShortCandidateFile",
    "StyleConfig",
    "SvgDocument",
    "TransportError",
    "UnknownRelation",
    "UnrecognizedSentence",
    "UnresolvedReference",
    "UseBeforeDefinition",
    "annotation_plan",
    "apply_relation",
    "bleu4",
    "build_prompt",
    "canonicalize",
    "caption_facts",
    "caption_reward",
    "composite_reward",
    "construct_scene",
    "derive_seed",
    "emit_sft_file",
    "extract_facts",
    "fact_to_sentence",
    "generate_qa",
    "generate_scene",
    "layout_labels",
    "load_config",
    "parse_caption",
    "parse_final_answer",
    "parse_program",
    "print_program",
    "read_records",
    "reasoning_reward",
    "refine_epoch",
    "render_svg",
    "residual",
    "rollout",
    "rouge_l",
    "run_raft",
    "sample_program",
    "select_best",
    "validate_clause",
    "write_records",
]

__version__ = "0.1.0"
