"""
Input Validation Module for the Nambu flow toolkit
Validates run settings before any computation starts and explains what is wrong
"""

import os


class InputValidator:
    """Validates run settings and provides helpful error messages"""

    # Validation thresholds
    THRESHOLDS = {
        'min_dim': 2,
        'max_dim': 4,  # fixtures and tables exist for R^3 and R^4 only
        'max_order_cap': 3,  # the tetrahedral velocities never exceed order 3
        'max_jobs_per_cpu': 2,
    }

    # Subcommands that need a specific dimension
    DIMENSIONS = {
        'jacobi': (3, 4),
        'induce': (3, 4),
        'profiles': (3, 4),
        'collapse': (3, 4),
        'verify-collapsed': (3, 4),
        'trivialize': (3,),
        'verify-x': (3,),
        'appendix-check': (3,),
    }

    # Subcommand and dimension combinations that take hours with a symbolic density
    HEAVY = {('induce', 4), ('verify-collapsed', 4), ('trivialize', 3)}

    @staticmethod
    def validate_positive_number(value, field_name, allow_zero=False):
        """Validate that a number is positive"""
        if value is None:
            return False, f"{field_name} is required"

        if allow_zero:
            if value < 0:
                return False, f"{field_name} cannot be negative"
        else:
            if value <= 0:
                return False, f"{field_name} must be greater than zero"

        return True, ""

    @staticmethod
    def validate_choice(value, field_name, choices):
        if value not in choices:
            return False, f"{field_name} must be one of {', '.join(map(str, choices))}, got {value!r}"
        return True, ""

    @staticmethod
    def validate_dimension(value, command=None):
        """Validate the base dimension, also against the subcommand"""
        valid, msg = InputValidator.validate_positive_number(value, "Dimension")
        if not valid:
            return False, msg

        low, high = InputValidator.THRESHOLDS['min_dim'], InputValidator.THRESHOLDS['max_dim']
        if value < low or value > high:
            return False, f"Dimension {value} is outside the supported range {low}..{high}"

        allowed = InputValidator.DIMENSIONS.get(command)
        if allowed and value not in allowed:
            return False, f"{command} runs over R^{' or R^'.join(map(str, allowed))}, not R^{value}"

        return True, ""

    @staticmethod
    def validate_order_cap(value):
        valid, msg = InputValidator.validate_positive_number(value, "Order cap")
        if not valid:
            return False, msg

        if value > InputValidator.THRESHOLDS['max_order_cap']:
            return False, f"Order cap {value} exceeds {InputValidator.THRESHOLDS['max_order_cap']}; the ansatz grows quickly and gains nothing"

        return True, ""

    @staticmethod
    def validate_jobs(value):
        valid, msg = InputValidator.validate_positive_number(value, "Worker count")
        if not valid:
            return False, msg

        limit = (os.cpu_count() or 1) * InputValidator.THRESHOLDS['max_jobs_per_cpu']
        if value > limit:
            return False, f"{value} workers is more than twice the available CPUs ({os.cpu_count()})"

        return True, ""

    @staticmethod
    def validate_heavy(config):
        """Heavy-tier runs must be asked for explicitly"""
        key = (config.command, config.dim)
        symbolic = config.rho == "symbolic" or config.command == "trivialize"
        if key in InputValidator.HEAVY and symbolic and not config.heavy:
            return False, f"{config.command} over R^{config.dim} with symbolic rho is a heavy run; pass --heavy"
        return True, ""


def validate_run_config(config):
    """
    Validate a RunConfig
    Returns: (errors, warnings)
    """
    validator = InputValidator()
    errors = []
    warnings = []

    valid, msg = validator.validate_dimension(config.dim, config.command)
    if not valid:
        errors.append(msg)

    valid, msg = validator.validate_choice(config.rho, "Density mode", ("symbolic", "unit"))
    if not valid:
        errors.append(msg)

    valid, msg = validator.validate_choice(config.output_format, "Output format", ("text", "json"))
    if not valid:
        errors.append(msg)

    valid, msg = validator.validate_order_cap(config.order_cap)
    if not valid:
        if config.order_cap is not None and config.order_cap > 0:
            warnings.append(msg)
        else:
            errors.append(msg)

    valid, msg = validator.validate_jobs(config.jobs)
    if not valid:
        if config.jobs is not None and config.jobs > 0:
            warnings.append(msg)
        else:
            errors.append(msg)

    valid, msg = validator.validate_heavy(config)
    if not valid:
        errors.append(msg)

    if config.command in ("verify-x", "appendix-check", "trivialize") or (
        config.command in ("profiles", "collapse") and config.dim == 3
    ):
        if config.rho == "unit":
            warnings.append(f"{config.command} over R^3 uses the symbolic density; --rho unit is ignored")

    return errors, warnings
