# Update an XML document (typically the default run configuration) from an override XML

from lxml.etree import _ElementTree

from .exceptions import ConfigError
from .io import read_xml


def merge_element(target, override):
    """
    Merge an override element into a target element. Attributes present in the override
    replace those in the target. Children are matched by tag (and by `name` attribute, where
    present); unmatched children are copied across recursively. Note that when multiple
    elements with the same tag and name exist, only the first will be updated.

    Operations are performed in place, modifying the target.

    Parameters
    ----------
    target : lxml.objectify.ObjectifiedElement
        Element to update.
    override : lxml.objectify.ObjectifiedElement
        Element holding the new values.

    Returns
    -------
    None
    """
    for name, value in override.attrib.items():
        target.set(name, value)

    for child in override.iterchildren():
        existing = None

        for candidate in target.iterchildren():
            if candidate.tag == child.tag and candidate.get("name") == child.get("name"):
                existing = candidate
                break

        if existing is None:
            existing = target.makeelement(child.tag, {})
            target.append(existing)

        merge_element(existing, child)


def update_from_template(tree, template):
    """
    Update an XML tree from an override document with the same outer tag. Values in the
    override win; anything the override does not mention keeps its value in `tree`.

    `tree` is modified in place.

    Parameters
    ----------
    tree : lxml.etree.ElementTree
        XML tree to be updated (e.g. the packaged default configuration).
    template : lxml.etree.ElementTree or str
        Either an existing lxml object or a path to the override XML file.

    Returns
    -------
    lxml.etree.ElementTree
        The updated XML tree.
    """
    if not isinstance(tree, _ElementTree):
        raise ConfigError("tree is not an lxml.etree._ElementTree object.")

    if isinstance(template, _ElementTree):
        template_tree = template
    else:
        template_tree = read_xml(template)

    root = tree.getroot()
    template_root = template_tree.getroot()

    if root.tag != template_root.tag:
        raise ConfigError(f"Outer tags do not match: expected <{root.tag}>, "
                          f"found <{template_root.tag}>.")

    merge_element(root, template_root)

    return tree
