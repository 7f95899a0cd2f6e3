"""
Exception hierarchy for policyflow.

Every error is a ValueError carrying a stable code and the process exit status
the CLI should use (1 for usage errors, 2 for data errors).
"""

from typing import Any, Dict


class PolicyFlowError(ValueError):
    """Base class of all policyflow errors."""
    code = "policyflow_error"
    exit_code = 2

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_record(self) -> Dict[str, Any]:
        """Structured error record for machine-readable output."""
        record: Dict[str, Any] = {"error": self.code, "message": self.message}
        for key, value in self.details.items():
            record[key] = value if isinstance(value, (int, float, bool)) or value is None else str(value)
        return record


class ConfigError(PolicyFlowError):
    code = "config_error"
    exit_code = 1


# Graph errors

class GraphError(PolicyFlowError):
    code = "graph_error"


class UnknownLabel(GraphError):
    code = "unknown_label"


class NonPositiveCapacity(GraphError):
    code = "non_positive_capacity"


class ReservedEpsilonLabel(GraphError):
    code = "reserved_epsilon_label"


class UnknownNode(GraphError):
    code = "unknown_node"


# Policy errors

class PolicyError(PolicyFlowError):
    code = "policy_error"


class PolicySyntaxError(PolicyError):
    code = "syntax_error"

    def __init__(self, message: str, position: int, **details: Any):
        super().__init__(f"{message} at position {position}", position=position, **details)
        self.position = position


class UnknownToken(PolicyError):
    code = "unknown_token"


class NoAcceptingState(PolicyError):
    code = "no_accepting_state"


class AlphabetMismatch(PolicyError):
    code = "alphabet_mismatch"


class UnknownPreset(PolicyError):
    code = "unknown_preset"
    exit_code = 1


class UnknownSymbol(PolicyError):
    code = "unknown_symbol"


class MultipleTerminals(PolicyError):
    code = "multiple_terminals"


# Flow errors

class FlowError(PolicyFlowError):
    code = "flow_error"


class SourceEqualsSink(FlowError):
    code = "source_equals_sink"


class UnboundedFlow(FlowError):
    code = "unbounded_flow"


# Oracle errors

class OracleError(PolicyFlowError):
    code = "oracle_error"


class ExplosionGuard(OracleError):
    code = "explosion_guard"


# Ingest errors

class IngestError(PolicyFlowError):
    code = "ingest_error"


class ParseError(IngestError):
    code = "parse_error"

    def __init__(self, line: int, reason: str, **details: Any):
        super().__init__(f"line {line}: {reason}", line=line, reason=reason, **details)
        self.line = line
        self.reason = reason


class ConflictingRelationship(IngestError):
    code = "conflicting_relationship"


class InsufficientSupport(IngestError):
    code = "insufficient_support"
