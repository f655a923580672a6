"""Controller monitors (formula DSL, built-in verified-model guards) and the model monitor."""

from vsrl.monitor.dsl import FormulaSyntaxError, UnboundVariableError, evaluate, parse_formula, to_text
from vsrl.monitor.monitors import (BindingError, MonitorSpec, builtin_monitors, eval_monitor, monitor_from_config,
                                   safe_action_set)
from vsrl.monitor.plant import PlantModel, check_model_monitor

__all__ = ["BindingError", "FormulaSyntaxError", "MonitorSpec", "PlantModel", "UnboundVariableError",
           "builtin_monitors", "check_model_monitor", "eval_monitor", "evaluate", "monitor_from_config",
           "parse_formula", "safe_action_set", "to_text"]
