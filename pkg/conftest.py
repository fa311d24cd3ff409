"""Shared test helpers"""
from typing import Dict, Iterable, Tuple

from data_model import AttributeSchema, Cell


def rows_from_records(schema: Iterable[AttributeSchema], records: Iterable[Dict[str, object]]) -> Tuple[Tuple[Cell, ...], ...]:
    """
    Build typed rows from dicts of raw values (labels for nominal, numbers for numeric)

    Absent keys become missing cells.
    """
    schema = tuple(schema)
    rows = []
    for record in records:
        row = []
        for attribute in schema:
            value = record.get(attribute.name)
            if value is None:
                row.append(None)
            elif attribute.is_nominal:
                row.append(attribute.category_index(str(value)))
            else:
                row.append(float(value))
        rows.append(tuple(row))
    return tuple(rows)
