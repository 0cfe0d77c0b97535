"""
Result persistence for the Nambu flow toolkit
Saves computed polynomials and check outcomes as JSON and loads them back
"""

import json
import logging
from datetime import datetime
from fractions import Fraction

from jetcalc import BaseSpace, DiffPoly, JetVar, jet_var, symbol_name, symbol_rank
from multivec import PolyVector

logger = logging.getLogger(__name__)

FORMAT_VERSION = "1.0"
REQUIRED_METADATA = ("version", "saved_at", "dimension")


def _multiindex(space, var):
    counts = [0] * space.dimension
    for k in var.letters:
        counts[k] += 1
    return counts


def diffpoly_to_json(p):
    """[{coeff: [num, den], factors: [[symbol, multiindex], ...]}, ...] in canonical term order"""
    space = p.space
    out = []
    for mono in sorted(p.terms):
        coeff = Fraction(p.terms[mono])
        factors = []
        for var, exp in mono:
            if var.is_coordinate:
                entry = [space.names[var.rank], [0] * space.dimension]
            else:
                entry = [symbol_name(var.rank), _multiindex(space, var)]
            factors.extend([entry] * exp)
        out.append({"coeff": [coeff.numerator, coeff.denominator], "factors": factors})
    return out


def diffpoly_from_json(data, space):
    terms = {}
    for term in data:
        num, den = term["coeff"]
        counts = {}
        for name, multiindex in term["factors"]:
            if len(multiindex) != space.dimension:
                raise ValueError(f"multi-index {multiindex} does not fit R^{space.dimension}")
            if name in space.names:
                var = JetVar(space.index(name), 0, ())
            else:
                letters = [k for k, n in enumerate(multiindex) for _ in range(n)]
                var = jet_var(symbol_rank(name), letters)
            counts[var] = counts.get(var, 0) + 1
        mono = tuple(sorted(counts.items()))
        terms[mono] = terms.get(mono, 0) + Fraction(num, den)
    return DiffPoly.from_terms(space, terms)


def polyvector_to_json(V):
    return {
        "degree": V.degree,
        "components": [[list(key), diffpoly_to_json(V.components[key])] for key in sorted(V.components)],
    }


def polyvector_from_json(data, space):
    components = {tuple(key): diffpoly_from_json(value, space) for key, value in data["components"]}
    return PolyVector(space, data["degree"], components)


def _encode(value):
    if isinstance(value, DiffPoly):
        return {"type": "diffpoly", "terms": diffpoly_to_json(value)}
    if isinstance(value, PolyVector):
        return {"type": "polyvector", **polyvector_to_json(value)}
    if isinstance(value, Fraction):
        return {"type": "fraction", "value": [value.numerator, value.denominator]}
    if isinstance(value, dict):
        return {str(k): _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def _decode(value, space):
    if isinstance(value, dict):
        kind = value.get("type")
        if kind == "diffpoly":
            return diffpoly_from_json(value["terms"], space)
        if kind == "polyvector":
            return polyvector_from_json(value, space)
        if kind == "fraction":
            return Fraction(*value["value"])
        return {k: _decode(v, space) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v, space) for v in value]
    return value


class ResultStore:
    """Named result sets kept in memory and exchanged as JSON documents"""

    def __init__(self):
        self.results = {}

    def save(self, name, results, space, rho="symbolic"):
        self.results[name] = {"metadata": self.metadata(space, rho, name), "results": results}
        return True

    def load(self, name):
        return self.results.get(name)

    def delete(self, name):
        if name in self.results:
            del self.results[name]
            return True
        return False

    def names(self):
        return list(self.results)

    @staticmethod
    def metadata(space, rho="symbolic", name=None):
        return {
            "name": name or "results",
            "version": FORMAT_VERSION,
            "saved_at": datetime.now().isoformat(timespec="seconds"),
            "dimension": space.dimension,
            "names": space.names,
            "rho": rho,
        }

    def export_json(self, results, metadata):
        """JSON text of the results with their metadata"""
        document = {"metadata": metadata, "results": _encode(results)}
        return json.dumps(document, indent=2, sort_keys=True)

    def import_json(self, text, name=None):
        """
        Parse an exported document.
        Returns: (success, message, payload) where payload holds metadata and decoded results
        """
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            return False, f"Invalid JSON file: {e}", None

        if not isinstance(document, dict) or "metadata" not in document:
            return False, "Invalid file format: missing metadata", None
        metadata = document["metadata"]
        missing = [key for key in REQUIRED_METADATA if key not in metadata]
        if missing:
            return False, f"Invalid file format: metadata lacks {', '.join(missing)}", None
        if str(metadata["version"]).split(".")[0] != FORMAT_VERSION.split(".")[0]:
            return False, f"Unsupported format version {metadata['version']}", None
        if "results" not in document:
            return False, "Invalid file format: missing results", None

        try:
            space = BaseSpace(metadata["dimension"], metadata.get("names"))
            results = _decode(document["results"], space)
        except (KeyError, TypeError, ValueError) as e:
            return False, f"Error importing results: {e}", None

        name = name or metadata.get("name") or f"imported_{datetime.now().strftime('%Y%m%d_%H%M%S')}"
        self.results[name] = {"metadata": metadata, "results": results}
        logger.info("Imported result set %s", name)
        return True, f"Successfully imported results: {name}", {"metadata": metadata, "results": results}
