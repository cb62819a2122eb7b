"""Parameter / MAC accounting and the per-layer architecture table."""
from .spec import INPUT_SIZE, build_network
from .weights import count_parameters  # noqa: F401  (re-exported)

# Reported totals for the reference implementation.
REPORTED_PARAMS = 55.3e6
REPORTED_GMACS = 191.52


def count_macs(spec=None, input_size=INPUT_SIZE):
    """Multiply-accumulates of all conv and linear layers for one image."""
    spec = spec if spec is not None else build_network()
    return sum(layer.macs(input_size) for layer in spec)


def spec_parameter_count(spec=None):
    """Learnable parameter count straight from the layer table (no store needed)."""
    spec = spec if spec is not None else build_network()
    total = 0
    for layer in spec:
        for name, shape in layer.params().items():
            if name.endswith((".bn.mean", ".bn.var")):
                continue
            n = 1
            for d in shape:
                n *= d
            total += n
    return total


def layer_rows(spec=None, input_size=INPUT_SIZE):
    spec = spec if spec is not None else build_network()
    rows = []
    for layer in spec:
        n, c, h, w = layer.output_shape(1, input_size)
        params = sum(
            _prod(s) for k, s in layer.params().items() if not k.endswith((".bn.mean", ".bn.var"))
        )
        rows.append({
            "block": layer.name,
            "kind": layer.kind,
            "output": f"N x {c} x {h} x {w}",
            "inputs": "+".join(layer.inputs),
            "params": params,
            "macs": layer.macs(input_size),
        })
    return rows


def _prod(shape):
    n = 1
    for d in shape:
        n *= d
    return n


def format_audit(spec=None, input_size=INPUT_SIZE, reference_size=800):
    """Plain-text architecture table plus totals (deterministic)."""
    spec = spec if spec is not None else build_network()
    rows = layer_rows(spec, input_size)
    lines = [f"{'Block':<10} {'Kind':<18} {'Output size':<22} {'Inputs':<14} {'Params':>12} {'MACs':>16}"]
    lines.append("-" * len(lines[0]))
    for r in rows:
        lines.append(f"{r['block']:<10} {r['kind']:<18} {r['output']:<22} {r['inputs']:<14} "
                     f"{r['params']:>12,} {r['macs']:>16,}")
    params = spec_parameter_count(spec)
    macs = count_macs(spec, input_size)
    ref = count_macs(spec, reference_size)
    lines.append("-" * len(lines[0]))
    lines.append(f"rows: {len(rows)}")
    lines.append(f"parameters: {params:,} ({params / 1e6:.2f}M; reported {REPORTED_PARAMS / 1e6:.1f}M, "
                 f"{100 * (params / REPORTED_PARAMS - 1):+.1f}%)")
    lines.append(f"MACs @ {input_size}x{input_size}: {macs:,} ({macs / 1e9:.2f} G)")
    lines.append(f"MACs @ {reference_size}x{reference_size}: {ref:,} ({ref / 1e9:.2f} G; reported "
                 f"{REPORTED_GMACS:.2f} G, {100 * (ref / 1e9 / REPORTED_GMACS - 1):+.1f}%)")
    return "\n".join(lines)
