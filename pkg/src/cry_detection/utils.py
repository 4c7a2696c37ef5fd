# Utility functions for commonly-used tasks: run-length handling of per-second label
# sequences, seeded random number generators, and summary statistics.

import numpy as np

from .exceptions import ConfigError


def make_rng(seed):
    """
    Create a random number generator from a seed.

    Parameters
    ----------
    seed : int, sequence of int, or numpy.random.Generator
        Seed material. An existing generator is returned unchanged, so functions can accept
        either form.

    Returns
    -------
    numpy.random.Generator
        The generator.
    """
    return np.random.default_rng(seed)


def runs(values):
    """
    Run-length encode a one-dimensional sequence.

    Parameters
    ----------
    values : array-like
        Sequence to encode (typically booleans, one per second).

    Returns
    -------
    list of (int, int, any)
        One `(start, length, value)` tuple per maximal run, in order.
    """
    values = np.asarray(values)

    if values.size == 0:
        return []

    change = np.flatnonzero(values[1:] != values[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [values.size]))

    return [(int(s), int(e - s), values[s].item()) for s, e in zip(starts, ends)]


def relabel_runs(values, predicate, new_value):
    """
    Replace every run for which `predicate` holds with `new_value`.

    The predicate sees the run list of the *input* sequence, so all replacements in one call
    are decided before any is applied.

    Parameters
    ----------
    values : array-like
        Sequence to process.
    predicate : callable
        Called as `predicate(index, run_list)` for each run; `run_list` is the output of
        `runs(values)` and `index` the position of the run in it.
    new_value : any
        Value assigned to selected runs.

    Returns
    -------
    numpy.ndarray
        A relabelled copy of `values`.
    """
    values = np.array(values, copy=True)
    run_list = runs(values)

    for index, (start, length, _) in enumerate(run_list):
        if predicate(index, run_list):
            values[start:start + length] = new_value

    return values


def is_interior(index, run_list):
    """
    Whether a run has a neighbouring run on both sides.

    Parameters
    ----------
    index : int
        Position of the run in `run_list`.
    run_list : list
        Output of `runs()`.

    Returns
    -------
    bool
    """
    return 0 < index < len(run_list) - 1


def macro_summary(values):
    """
    Unweighted mean and population standard deviation, as reported for per-participant scores.

    Parameters
    ----------
    values : array-like
        One value per participant.

    Returns
    -------
    (float, float)
        Mean and standard deviation (ddof=0).
    """
    values = np.asarray(values, dtype=float)

    if values.size == 0:
        raise ValueError("Cannot summarise an empty set of scores.")

    return float(np.mean(values)), float(np.std(values))


def set_value(xml_root, xpath, name, value):
    """
    Update or add a single attribute value in an XML document.

    `xml_root` will be modified in place.

    Parameters
    ----------
    xml_root : lxml.etree.ElementTree.Element
        The root element of the xml file.
    xpath : str
        An xpath query string defining the element to be modified.
    name : str
        The attribute name to be updated or added.
    value : any
        The value this attribute should be set to.

    Returns
    -------
    None
    """
    element = xml_root.find(xpath)

    if element is None:
        raise ConfigError(f"No match found for xpath query {xpath}.")

    element.set(name, str(value))
