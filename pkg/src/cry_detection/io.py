# Input / output functions for XML descriptors (run configs, model files) and the binary
# parameter blobs that accompany model descriptors.

import numpy as np

from lxml import objectify
from lxml.etree import ElementTree


def from_string(string):
    """
    Parse an xml string.

    Parameters
    ----------
    string : str or bytes
        The xml string.

    Returns
    -------
    lxml.etree.ElementTree
        The xml tree.
    """
    parser = objectify.makeparser(remove_blank_text=True, remove_comments=True)
    root = objectify.fromstring(string, parser=parser)
    return ElementTree(root)


def read_xml(xml_path):
    """
    Read an XML descriptor or configuration file.

    Parameters
    ----------
    xml_path : str or pathlib.Path
        Path to the xml file.

    Returns
    -------
    lxml.etree.ElementTree
        The xml tree.
    """
    parser = objectify.makeparser(remove_blank_text=True, remove_comments=True)
    return objectify.parse(str(xml_path), parser=parser)


def write_xml(tree, output_path):
    """
    Write an XML tree to disk.

    Parameters
    ----------
    tree : lxml.etree.ElementTree
        The xml tree to write.
    output_path : str or pathlib.Path
        Path to write the xml to.

    Returns
    -------
    None
    """
    objectify.deannotate(tree.getroot(), cleanup_namespaces=True)

    with open(output_path, "wb") as f:
        tree.write(f, pretty_print=True, encoding="utf-8", xml_declaration=True)


def write_blob(arrays, output_path, dtype="<f4"):
    """
    Write named arrays back to back into one little-endian binary file.

    Parameters
    ----------
    arrays : dict of str to numpy.ndarray
        Arrays to write, in insertion order.
    output_path : str or pathlib.Path
        Path of the blob file.
    dtype : str, optional
        Little-endian numpy dtype used on disk (default: 32-bit float).

    Returns
    -------
    list of (str, int, tuple)
        The layout of the blob: name, element offset and shape of each array. Store this in
        the descriptor so `read_blob` can slice the arrays back out.
    """
    layout = []
    offset = 0

    with open(output_path, "wb") as f:
        for name, array in arrays.items():
            array = np.ascontiguousarray(array, dtype=dtype)
            f.write(array.tobytes())

            layout.append((name, offset, tuple(array.shape)))
            offset += array.size

    return layout


def read_blob(blob_path, layout, dtype="<f4"):
    """
    Read arrays written by `write_blob`.

    Parameters
    ----------
    blob_path : str or pathlib.Path
        Path of the blob file.
    layout : list of (str, int, tuple)
        Name, element offset and shape of each array.
    dtype : str, optional
        Little-endian numpy dtype used on disk.

    Returns
    -------
    dict of str to numpy.ndarray
        The arrays, in native byte order.
    """
    flat = np.fromfile(str(blob_path), dtype=dtype)
    arrays = {}

    for name, offset, shape in layout:
        size = int(np.prod(shape, dtype=np.int64))

        if offset + size > flat.size:
            raise ValueError(f"Blob {blob_path} is too short for array '{name}'.")

        native = np.dtype(dtype).newbyteorder("=")
        arrays[name] = flat[offset:offset + size].reshape(shape).astype(native)

    return arrays


def format_shape(shape):
    """Encode a shape tuple as a comma-separated attribute value."""
    return ",".join(str(n) for n in shape)


def parse_shape(text):
    """Decode a shape attribute written by `format_shape`."""
    if text == "":
        return ()

    return tuple(int(n) for n in text.split(","))
