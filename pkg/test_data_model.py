"""Tests for schema parsing, CSV ingestion, imputation and discretization"""
import dataclasses
import io

import pytest

from conftest import rows_from_records
from data_model import (
    AttributeKind,
    AttributeRole,
    AttributeSchema,
    Dataset,
    class_distribution,
    discretize,
    impute_means,
    load_schema,
    parse_csv,
    parse_discretize_rule,
    parse_schema,
    restrict_features,
    schema_fingerprint,
    serialize_csv,
)
from errors import (
    AllMissingColumnError,
    AttrNotNumericError,
    HeaderMismatchError,
    LabelArityError,
    MalformedRowError,
    MissingCellError,
    NonNumericCellError,
    SchemaError,
    UnknownCategoryError,
)

SCHEMA_TEXT = """\
# cohort layout
PCV,numeric,feature
Headache,nominal,feature,YES|NO
IgM,nominal,ignored,POSITIVE|NEGATIVE
Dengue,nominal,target,YES|NO
"""


def schema():
    return parse_schema(io.StringIO(SCHEMA_TEXT))


def test_parse_schema_reads_kinds_roles_and_categories():
    parsed = schema()
    assert [a.name for a in parsed] == ["PCV", "Headache", "IgM", "Dengue"]
    assert parsed[0].kind is AttributeKind.NUMERIC
    assert parsed[2].role is AttributeRole.IGNORED
    assert parsed[3].categories == ("YES", "NO")


@pytest.mark.parametrize(
    "text",
    [
        "A,numeric,feature\n",  # no target
        "A,numeric,target\n",  # numeric target
        "A,nominal,target,YES|NO|MAYBE\n",  # three classes
        "A,nominal,target,YES|NO\nB,nominal,target,YES|NO\n",  # two targets
        "A,numeric,feature\nA,numeric,feature\nT,nominal,target,YES|NO\n",  # duplicate name
        "A,numeric,feature,X|Y\nT,nominal,target,YES|NO\n",  # numeric with categories
        "A,nominal,feature,X|X\nT,nominal,target,YES|NO\n",  # repeated category
        "A,ordinal,feature\nT,nominal,target,YES|NO\n",  # unknown kind
    ],
)
def test_invalid_schemas_are_rejected(text):
    with pytest.raises(SchemaError):
        parse_schema(io.StringIO(text))


def test_schema_error_reports_the_line():
    with pytest.raises(SchemaError) as excinfo:
        parse_schema(io.StringIO("A,numeric,feature\nB,bogus,feature\nT,nominal,target,YES|NO\n"))
    assert excinfo.value.context["line"] == 2


def test_fingerprint_depends_on_category_order():
    base = schema()
    flipped = base[:3] + (AttributeSchema("Dengue", "nominal", "target", ("NO", "YES")),)
    assert schema_fingerprint(base) == schema_fingerprint(schema())
    assert schema_fingerprint(base) != schema_fingerprint(flipped)


def test_parse_csv_types_cells_and_accepts_any_header_order():
    csv = "Dengue,IgM,Headache,PCV\nYES,POSITIVE,NO,41.5\nNO,?,YES,\n"
    ds = parse_csv(io.StringIO(csv), schema())
    assert len(ds) == 2
    assert ds.instances[0] == (41.5, 1, 0, 0)
    # both missing tokens map to None
    assert ds.instances[1] == (None, 0, None, 1)
    assert ds.positive_label == "YES"
    assert class_distribution(ds) == (1, 1)


def test_unknown_category_names_the_line():
    csv = "PCV,Headache,IgM,Dengue\n40,YES,POSITIVE,YES\n41,SOMETIMES,POSITIVE,NO\n"
    with pytest.raises(UnknownCategoryError) as excinfo:
        parse_csv(io.StringIO(csv), schema())
    assert excinfo.value.context["line"] == 3


def test_non_numeric_cell_is_rejected():
    csv = "PCV,Headache,IgM,Dengue\nforty,YES,POSITIVE,YES\n"
    with pytest.raises(NonNumericCellError):
        parse_csv(io.StringIO(csv), schema())


def test_header_mismatch_is_rejected():
    csv = "PCV,Headache,Dengue\n40,YES,YES\n"
    with pytest.raises(HeaderMismatchError):
        parse_csv(io.StringIO(csv), schema())


def test_row_with_extra_cells_is_malformed():
    csv = "PCV,Headache,IgM,Dengue\n40,YES,POSITIVE,YES\n41,NO,NEGATIVE,NO,EXTRA\n"
    with pytest.raises(MalformedRowError):
        parse_csv(io.StringIO(csv), schema())


def test_target_may_be_absent_for_prediction_input():
    csv = "PCV,Headache,IgM\n40,YES,POSITIVE\n"
    ds = parse_csv(io.StringIO(csv), schema(), target_optional=True)
    assert ds.instances[0][3] is None
    with pytest.raises(MissingCellError):
        ds.positive_mask


def test_serialized_csv_parses_back_to_the_same_instances():
    csv = "PCV,Headache,IgM,Dengue\n40.25,YES,?,YES\n,NO,NEGATIVE,NO\n"
    ds = parse_csv(io.StringIO(csv), schema())
    out = io.StringIO()
    serialize_csv(ds, out)
    assert out.getvalue().splitlines()[0] == "PCV,Headache,IgM,Dengue"
    assert parse_csv(io.StringIO(out.getvalue()), schema()).instances == ds.instances


def test_dataset_is_immutable():
    ds = Dataset(schema(), ((40.0, 0, 0, 0),))
    with pytest.raises(dataclasses.FrozenInstanceError):
        ds.instances = ()


def numeric_dataset(values, headache=None):
    records = [
        {"PCV": v, "Headache": (headache[i] if headache else "YES"), "Dengue": "YES" if i % 2 == 0 else "NO"}
        for i, v in enumerate(values)
    ]
    return Dataset(schema(), rows_from_records(schema(), records))


def test_impute_means_uses_unrounded_column_mean():
    ds = numeric_dataset([1.0, 2.0, None, 2.0], headache=["YES", None, "NO", "YES"])
    imputed, report = impute_means(ds)
    assert imputed.numeric_values("PCV")[2] == pytest.approx(5.0 / 3.0, abs=1e-15)
    assert len(report) == 1
    assert report.get("PCV").count == 1
    assert report.get("PCV").value == pytest.approx(5.0 / 3.0)
    # nominal gaps are left alone
    assert imputed.column("Headache")[1] is None
    # input is unchanged
    assert ds.column("PCV")[2] is None


def test_impute_report_frame_layout():
    _, report = impute_means(numeric_dataset([4.0, None, 6.0]))
    frame = report.to_frame()
    assert list(frame.columns) == ["attribute", "imputed", "mean"]
    assert frame.iloc[0].tolist() == ["PCV", 1, 5.0]


def test_impute_nothing_missing_gives_empty_report():
    _, report = impute_means(numeric_dataset([1.0, 2.0]))
    assert len(report) == 0


def test_all_missing_numeric_column_cannot_be_imputed():
    with pytest.raises(AllMissingColumnError):
        impute_means(numeric_dataset([None, None]))


def test_discretize_boundary_goes_to_upper_label():
    ds = discretize(numeric_dataset([9.99, 10.0, 10.01]), "PCV", [10.0], ["LOW", "HIGH"])
    attribute = ds.attribute("PCV")
    assert attribute.kind is AttributeKind.NOMINAL
    assert attribute.categories == ("LOW", "HIGH")
    assert ds.column("PCV") == (0, 1, 1)


def test_discretize_checks_its_arguments():
    ds = numeric_dataset([1.0, 2.0])
    with pytest.raises(LabelArityError):
        discretize(ds, "PCV", [1.5], ["ONE"])
    with pytest.raises(AttrNotNumericError):
        discretize(ds, "Headache", [0.5], ["A", "B"])
    with pytest.raises(MissingCellError):
        discretize(numeric_dataset([1.0, None]), "PCV", [1.5], ["A", "B"])


def test_parse_discretize_rule():
    rule = parse_discretize_rule("PCV:42.5:NORMAL:HIGH")
    assert rule.attribute == "PCV"
    assert rule.cutpoints == (42.5,)
    assert rule.labels == ("NORMAL", "HIGH")
    assert rule.to_text() == "PCV:42.5:NORMAL:HIGH"
    for bad in ("PCV:42.5:NORMAL", "PCV:x:A:B", "PCV::A:B"):
        with pytest.raises(ValueError):
            parse_discretize_rule(bad)


def test_restrict_features_marks_others_ignored():
    ds = restrict_features(numeric_dataset([1.0, 2.0]), ["Headache"])
    assert [a.name for a in ds.features] == ["Headache"]
    assert ds.attribute("PCV").role is AttributeRole.IGNORED


def test_impute_is_idempotent_and_keeps_column_means():
    ds = numeric_dataset([1.0, None, 4.0, None, 7.5], headache=["YES", "NO", None, "YES", "NO"])
    once, report = impute_means(ds)
    twice, again = impute_means(once)
    assert twice.instances == once.instances
    assert len(again) == 0
    assert again.rows == ()
    assert report.rows == (1, 3)
    assert once.numeric_values("PCV").mean() == pytest.approx(12.5 / 3.0)
    assert again.means["PCV"] == pytest.approx(report.means["PCV"])


def test_imputation_report_marks_imputed_instances():
    _, report = impute_means(numeric_dataset([None, 2.0, 3.0, None]))
    assert report.means == {"PCV": pytest.approx(2.5)}
    assert report.row_mask(4).tolist() == [True, False, False, True]


def test_discretize_leaves_the_class_distribution_alone():
    ds = numeric_dataset([9.0, 10.5, 12.0, 8.0, 11.0])
    before = class_distribution(ds)
    assert class_distribution(discretize(ds, "PCV", [10.0], ["LOW", "HIGH"])) == before == (3, 2)


def test_undecodable_csv_is_malformed():
    data = b"PCV,Headache,IgM,Dengue\n40,\xff\xfeS,POSITIVE,YES\n"
    with pytest.raises(MalformedRowError):
        parse_csv(io.BytesIO(data), schema())


def test_undecodable_schema_names_the_file(tmp_path):
    path = tmp_path / "cohort.schema"
    path.write_bytes(SCHEMA_TEXT.encode("utf-8").replace(b"YES", b"\xff\xfe", 1))
    with pytest.raises(SchemaError) as excinfo:
        load_schema(path)
    assert excinfo.value.context["file"] == str(path)
