//! JSON rule documents, analysis reports and SVG rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::analysis::{DivergenceConstants, DivergenceRow, DivergenceTable, GeometricSide};
use crate::construction::{k_schedule, NestedFamily, NestedPlacement};
use crate::error::Error;
use crate::geometry::{Aabb, Patch, PlacedTile, Point, Prototile};
use crate::scalar::{format_rational, format_scientific, Scalar};
use crate::spectral::{SpectralReport, SubstitutionMatrix};
use crate::substitution::{RuleViolation, SubstitutionRule};
use crate::Rational;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrototileDoc {
    pub id: String,
    pub extents: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChildDoc {
    pub child: String,
    pub offset: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacedDoc {
    pub tile: String,
    pub offset: Vec<String>,
}

/// Wire form of a rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDocument {
    pub dimension: usize,
    pub inflation: String,
    pub prototiles: Vec<PrototileDoc>,
    pub children: BTreeMap<String, Vec<ChildDoc>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub named_patches: BTreeMap<String, Vec<PlacedDoc>>,
}

/// Why a rule document was rejected.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RuleParseError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("rule fails validation:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

/// A parsed rule plus its named patches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadedRule {
    pub rule: SubstitutionRule<Rational>,
    pub ids: Vec<String>,
    pub named: BTreeMap<String, Patch<Rational>>,
}

impl LoadedRule {
    pub fn patch(&self, name: &str) -> Result<&Patch<Rational>, Error> {
        self.named.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.named.keys().map(String::as_str).collect();
            Error::Invalid(format!("no named patch {name:?} (known: {})", known.join(", ")))
        })
    }

    pub fn prototile_index(&self, id: &str) -> Result<usize, Error> {
        self.ids.iter().position(|x| x == id).ok_or_else(|| Error::Invalid(format!("unknown prototile {id:?}")))
    }
}

/// Parses `p`, `-p` or `p/q` with `q > 0`.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let int = |s: &str| -> Result<BigInt, String> {
        let digits = s.strip_prefix('-').unwrap_or(s);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("{text:?} is not a rational of the form p/q"));
        }
        s.parse::<BigInt>().map_err(|e| e.to_string())
    };
    match text.split_once('/') {
        None => Ok(Rational::from_integer(int(text)?)),
        Some((n, d)) => {
            let n = int(n)?;
            let d = int(d)?;
            if !d.is_positive() {
                return Err(format!("{text:?} has a non-positive denominator"));
            }
            Ok(Rational::new(n, d))
        }
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> RuleParseError {
    RuleParseError::Schema { path: path.into(), message: message.into() }
}

fn rationals(values: &[String], dim: usize, path: &str) -> Result<Vec<Rational>, RuleParseError> {
    if values.len() != dim {
        return Err(schema(path, format!("expected {dim} coordinates, found {}", values.len())));
    }
    values
        .iter()
        .enumerate()
        .map(|(j, v)| parse_rational(v).map_err(|e| schema(format!("{path}[{j}]"), e)))
        .collect()
}

fn describe_violation(v: &RuleViolation<Rational>, ids: &[String]) -> String {
    let name = |i: usize| ids.get(i).cloned().unwrap_or_else(|| i.to_string());
    match v {
        RuleViolation::Cover { prototile, report, witness } => {
            let tiles: Vec<String> = witness
                .iter()
                .map(|t| {
                    let c: Vec<String> = t.offset.coords.iter().map(format_rational).collect();
                    format!("{} at ({})", name(t.prototile), c.join(", "))
                })
                .collect();
            format!("children of {}: {report} [{}]", name(*prototile), tiles.join("; "))
        }
        RuleViolation::UnknownChild { prototile, child } => {
            format!("children of {}: unknown child {child}", name(*prototile))
        }
        other => other.to_string(),
    }
}

impl RuleDocument {
    pub fn into_rule(self) -> Result<LoadedRule, RuleParseError> {
        let d = self.dimension;
        if d == 0 {
            return Err(schema("dimension", "must be positive"));
        }
        if self.prototiles.is_empty() {
            return Err(schema("prototiles", "at least one prototile is required"));
        }
        let inflation = parse_rational(&self.inflation).map_err(|e| schema("inflation", e))?;
        let mut ids = Vec::new();
        let mut prototiles = Vec::new();
        for (i, p) in self.prototiles.iter().enumerate() {
            if ids.contains(&p.id) {
                return Err(schema(format!("prototiles[{i}].id"), format!("duplicate id {:?}", p.id)));
            }
            let extents = rationals(&p.extents, d, &format!("prototiles[{i}].extents"))?;
            let shape = Prototile::new(p.id.clone(), extents)
                .map_err(|_| schema(format!("prototiles[{i}].extents"), "extents must be positive"))?;
            ids.push(p.id.clone());
            prototiles.push(shape);
        }
        let index = |id: &str, path: &str| -> Result<usize, RuleParseError> {
            ids.iter().position(|x| x == id).ok_or_else(|| schema(path, format!("unknown prototile {id:?}")))
        };
        if let Some(extra) = self.children.keys().find(|k| !ids.contains(k)) {
            return Err(schema(format!("children.{extra}"), format!("unknown prototile {extra:?}")));
        }
        let mut children = Vec::new();
        for id in &ids {
            let list = self.children.get(id).ok_or_else(|| schema(format!("children.{id}"), "missing child list"))?;
            let mut tiles = Vec::new();
            for (j, c) in list.iter().enumerate() {
                let path = format!("children.{id}[{j}]");
                let child = index(&c.child, &format!("{path}.child"))?;
                let offset = rationals(&c.offset, d, &format!("{path}.offset"))?;
                tiles.push(PlacedTile::new(child, Point::new(offset)));
            }
            children.push(tiles);
        }
        let mut named = BTreeMap::new();
        for (name, tiles) in &self.named_patches {
            let mut patch = Vec::new();
            for (j, t) in tiles.iter().enumerate() {
                let path = format!("named_patches.{name}[{j}]");
                let tile = index(&t.tile, &format!("{path}.tile"))?;
                let offset = rationals(&t.offset, d, &format!("{path}.offset"))?;
                patch.push(PlacedTile::new(tile, Point::new(offset)));
            }
            named.insert(name.clone(), Patch::new(patch).canonical());
        }
        let rule = SubstitutionRule::new(inflation, prototiles, children)
            .map_err(|e| RuleParseError::Validation(vec![e.to_string()]))?;
        let violations = rule.validate();
        if !violations.is_empty() {
            return Err(RuleParseError::Validation(violations.iter().map(|v| describe_violation(v, &ids)).collect()));
        }
        Ok(LoadedRule { rule, ids, named })
    }

    pub fn from_rule(rule: &SubstitutionRule<Rational>, named: &BTreeMap<String, Patch<Rational>>) -> Self {
        let ids: Vec<String> = rule.prototiles.iter().map(|p| p.name.clone()).collect();
        let coords = |p: &Point<Rational>| p.coords.iter().map(format_rational).collect::<Vec<_>>();
        RuleDocument {
            dimension: rule.dimension,
            inflation: format_rational(&rule.inflation),
            prototiles: rule
                .prototiles
                .iter()
                .map(|p| PrototileDoc { id: p.name.clone(), extents: p.extents.iter().map(format_rational).collect() })
                .collect(),
            children: ids
                .iter()
                .zip(&rule.children)
                .map(|(id, list)| {
                    let docs = list.iter().map(|t| ChildDoc { child: ids[t.prototile].clone(), offset: coords(&t.offset) });
                    (id.clone(), docs.collect())
                })
                .collect(),
            named_patches: named
                .iter()
                .map(|(name, patch)| {
                    let docs = patch.tiles.iter().map(|t| PlacedDoc { tile: ids[t.prototile].clone(), offset: coords(&t.offset) });
                    (name.clone(), docs.collect())
                })
                .collect(),
        }
    }
}

fn json_error(e: &serde_json::Error) -> RuleParseError {
    RuleParseError::Json { line: e.line(), column: e.column(), message: e.to_string() }
}

/// Document from JSON text, with field paths on schema errors.
pub fn parse_document(text: &str) -> Result<RuleDocument, RuleParseError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| json_error(&e))?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })
}

/// Parses, converts and validates a rule document.
pub fn parse_rule(text: &str) -> Result<LoadedRule, RuleParseError> {
    parse_document(text)?.into_rule()
}

pub fn serialize_rule(rule: &SubstitutionRule<Rational>, named: &BTreeMap<String, Patch<Rational>>) -> String {
    let mut s = serde_json::to_string_pretty(&RuleDocument::from_rule(rule, named)).expect("documents serialize");
    s.push('\n');
    s
}

/// The bundled example rule as shipped in `data/example.json`.
pub const EXAMPLE_DOCUMENT: &str = include_str!("../data/example.json");

pub fn example_document() -> LoadedRule {
    parse_rule(EXAMPLE_DOCUMENT).expect("bundled document is valid")
}

/// Finite point sets: arrays of coordinate arrays, each coordinate an
/// integer or a `p/q` string.
pub fn parse_points(text: &str) -> Result<Vec<Point<Rational>>, RuleParseError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| json_error(&e))?;
    let rows = value.as_array().ok_or_else(|| schema("$", "expected an array of points"))?;
    let mut out = Vec::with_capacity(rows.len());
    let mut dim = None;
    for (i, row) in rows.iter().enumerate() {
        let coords = row.as_array().ok_or_else(|| schema(format!("[{i}]"), "expected an array of coordinates"))?;
        if *dim.get_or_insert(coords.len()) != coords.len() || coords.is_empty() {
            return Err(schema(format!("[{i}]"), "points must share a positive dimension"));
        }
        let parsed = coords
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let path = format!("[{i}][{j}]");
                match c {
                    serde_json::Value::String(s) => parse_rational(s).map_err(|e| schema(path, e)),
                    serde_json::Value::Number(n) => n
                        .as_i64()
                        .map(Rational::from_i64)
                        .ok_or_else(|| schema(path, "non-integer numbers must be given as \"p/q\" strings")),
                    _ => Err(schema(path, "expected a number or a \"p/q\" string")),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(Point::new(parsed));
    }
    Ok(out)
}

/// Fixed-point decimal with `digits` places; never prints `-0`.
pub fn decimal(x: f64, digits: usize) -> String {
    let s = format!("{x:.digits$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigenvalueEntry {
    pub re: String,
    pub im: String,
    pub modulus: String,
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_value: Option<String>,
    pub algebraic_multiplicity: usize,
    pub geometric_multiplicity: usize,
    pub orthogonal_to_ones: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantsEntry {
    pub c0: String,
    pub c1_squared: String,
    pub c2: String,
    pub c3: String,
    pub growth_ratio: String,
    pub growth_ratio_exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstructionEntry {
    pub p: String,
    pub q: String,
    pub a: u32,
    pub h: u32,
    pub k_schedule: Vec<u64>,
    pub constants: ConstantsEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SideEntry {
    pub count: String,
    pub collar_count: String,
    pub decomposition_holds: bool,
    pub collar_bound_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometricEntry {
    pub omega: SideEntry,
    pub eta: SideEntry,
    pub quotient: String,
    pub quotient_decimal: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowEntry {
    pub m: usize,
    pub index: usize,
    pub k: u64,
    pub k_prev: u64,
    pub cubes: String,
    pub boundary: String,
    pub nested_omega: String,
    pub nested_eta: String,
    pub nested_difference: String,
    pub lower_bound: String,
    pub lower_bound_scientific: String,
    pub geometric: Option<GeometricEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableEntry {
    pub omega: String,
    pub eta: String,
    pub constants: ConstantsEntry,
    pub rows: Vec<RowEntry>,
}

/// Deterministic summary of a rule's spectrum and, in the continuum regime,
/// of the nested construction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub dimension: usize,
    pub inflation: String,
    pub prototiles: Vec<String>,
    pub matrix: Vec<Vec<String>>,
    pub primitive: bool,
    pub primitivity_witness: Option<u32>,
    pub lambda1: String,
    pub eigenvalues: Vec<EigenvalueEntry>,
    pub u1: Vec<String>,
    pub t_index: Option<usize>,
    pub threshold: String,
    pub classification: String,
    pub exact_spectrum: bool,
    pub construction: Option<ConstructionEntry>,
    pub divergence: Option<TableEntry>,
}

fn sci(r: &Rational) -> String {
    format_scientific(r, 12)
}

pub fn constants_entry(c: &DivergenceConstants) -> ConstantsEntry {
    ConstantsEntry {
        c0: format_rational(&c.c0),
        c1_squared: format_rational(&c.c1_squared),
        c2: format_rational(&c.c2),
        c3: format_rational(&c.c3),
        growth_ratio: format_rational(&c.ratio),
        growth_ratio_exact: c.exact_ratio,
    }
}

fn side_entry(s: &GeometricSide) -> SideEntry {
    SideEntry {
        count: s.count.to_string(),
        collar_count: s.collar_count.to_string(),
        decomposition_holds: s.decomposition_holds,
        collar_bound_holds: s.collar_bound_holds,
    }
}

fn row_entry(r: &DivergenceRow) -> RowEntry {
    RowEntry {
        m: r.m,
        index: r.index,
        k: r.k,
        k_prev: r.k_prev,
        cubes: r.cubes.to_string(),
        boundary: r.boundary.to_string(),
        nested_omega: r.nested_omega.to_string(),
        nested_eta: r.nested_eta.to_string(),
        nested_difference: r.nested_difference.to_string(),
        lower_bound: format_rational(&r.lower_bound),
        lower_bound_scientific: sci(&r.lower_bound),
        geometric: r.geometric.as_ref().map(|g| GeometricEntry {
            omega: side_entry(&g.omega),
            eta: side_entry(&g.eta),
            quotient: format_rational(&g.quotient),
            quotient_decimal: decimal(g.quotient.approx_f64(), 12),
        }),
    }
}

pub fn table_entry(t: &DivergenceTable) -> TableEntry {
    TableEntry {
        omega: t.omega.to_string(),
        eta: t.eta.to_string(),
        constants: constants_entry(&t.constants),
        rows: t.rows.iter().map(row_entry).collect(),
    }
}

/// Assembles the report; `family` and `table` are present only in the
/// continuum regime.
pub fn analysis_report(
    rule: &SubstitutionRule<Rational>,
    matrix: &SubstitutionMatrix,
    spectrum: &SpectralReport,
    family: Option<(&str, &str, &NestedFamily, &DivergenceConstants)>,
    table: Option<&DivergenceTable>,
) -> AnalysisReport {
    let scale = spectrum.eigenspaces.first().map_or(1.0, |e| e.modulus().max(1.0));
    let clean = |x: f64| if x.abs() < 1e-12 * scale { 0.0 } else { x };
    let eigenvalues = spectrum
        .eigenspaces
        .iter()
        .map(|e| EigenvalueEntry {
            re: decimal(clean(e.value.re), 12),
            im: decimal(clean(e.value.im), 12),
            modulus: decimal(e.modulus(), 12),
            exact: e.exact_value.is_some(),
            exact_value: e.exact_value.as_ref().map(format_rational),
            algebraic_multiplicity: e.algebraic,
            geometric_multiplicity: e.geometric(),
            orthogonal_to_ones: e.orthogonal_to_ones,
        })
        .collect();
    let construction = family.map(|(p, q, f, c)| ConstructionEntry {
        p: p.to_string(),
        q: q.to_string(),
        a: f.a,
        h: f.h,
        k_schedule: k_schedule(f.h, 6).unwrap_or_default(),
        constants: constants_entry(c),
    });
    AnalysisReport {
        dimension: rule.dimension,
        inflation: format_rational(&rule.inflation),
        prototiles: rule.prototiles.iter().map(|p| p.name.clone()).collect(),
        matrix: matrix.entries.iter().map(|row| row.iter().map(BigInt::to_string).collect()).collect(),
        primitive: spectrum.primitivity.is_primitive,
        primitivity_witness: spectrum.primitivity.witness_power,
        lambda1: format_rational(&spectrum.lambda1),
        eigenvalues,
        u1: spectrum.u1.iter().map(format_rational).collect(),
        t_index: spectrum.t_index,
        threshold: decimal(spectrum.threshold, 12),
        classification: spectrum.classification.as_str().to_string(),
        exact_spectrum: spectrum.exact,
        construction,
        divergence: table.map(table_entry),
    }
}

pub fn report_json(report: &AnalysisReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

/// Extra layers drawn over a patch.
#[derive(Clone, Debug, Default)]
pub struct SvgStyle {
    pub origin_marker: bool,
    pub mark: Option<Point<Rational>>,
    pub outlines: Vec<Aabb<Rational>>,
}

impl SvgStyle {
    /// Outlines of every level of a nested chain plus the level-1 mark,
    /// which sits at the origin.
    pub fn for_chain(chain: &NestedPlacement) -> Self {
        SvgStyle {
            origin_marker: true,
            mark: chain.chain.first().map(|l| l.mark.clone()),
            outlines: chain.chain.iter().map(|l| l.support.clone()).collect(),
        }
    }
}

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1", "#9c755f"];

/// 2D SVG with one `rect` per tile in canonical order; `y` points up.
pub fn render_svg(patch: &Patch<Rational>, shapes: &[Prototile<Rational>], style: &SvgStyle) -> crate::Result<String> {
    let patch = patch.clone().canonical();
    let boxes: Vec<Aabb<Rational>> = patch.tiles.iter().map(|t| t.support(shapes)).collect::<crate::Result<_>>()?;
    let dims = boxes.iter().chain(&style.outlines).map(Aabb::dim).chain(style.mark.iter().map(Point::dim));
    for d in dims.chain(shapes.iter().map(Prototile::dim)) {
        if d != 2 {
            return Err(Error::Invalid(format!("SVG rendering needs dimension 2, found {d}")));
        }
    }
    let mut frame: Option<Aabb<Rational>> = None;
    for b in boxes.iter().chain(&style.outlines) {
        frame = Some(match frame {
            None => b.clone(),
            Some(f) => f.hull(b),
        });
    }
    let mut points: Vec<Point<Rational>> = style.mark.iter().cloned().collect();
    if style.origin_marker {
        points.push(Point::origin(2));
    }
    for p in &points {
        let dot = Aabb { min: p.clone(), extents: vec![Rational::zero(), Rational::zero()] };
        frame = Some(match frame {
            Some(f) => f.hull(&dot),
            None => dot,
        });
    }
    let (x0, y0, w, h) = match &frame {
        Some(f) => {
            let w = f.extents[0].approx_f64().max(1e-6);
            let h = f.extents[1].approx_f64().max(1e-6);
            (f.lo(0).approx_f64(), f.hi(1).approx_f64(), w, h)
        }
        None => (0.0, 0.0, 1.0, 1.0),
    };
    let pad = 0.02 * w.max(h);
    let stroke = 0.004 * w.max(h);
    let n = |v: f64| decimal(v, 6);
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).ok();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        n(x0 - pad),
        n(-y0 - pad),
        n(w + 2.0 * pad),
        n(h + 2.0 * pad)
    )
    .ok();
    writeln!(out, r#"<g id="tiles" stroke="black" stroke-width="{}">"#, n(stroke)).ok();
    for (t, b) in patch.tiles.iter().zip(&boxes) {
        writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" data-tile="{}"/>"#,
            n(b.lo(0).approx_f64()),
            n(-b.hi(1).approx_f64()),
            n(b.extents[0].approx_f64()),
            n(b.extents[1].approx_f64()),
            PALETTE[t.prototile % PALETTE.len()],
            shapes[t.prototile].name
        )
        .ok();
    }
    writeln!(out, "</g>").ok();
    if !style.outlines.is_empty() {
        writeln!(out, r#"<g id="outlines" fill="none" stroke="crimson" stroke-width="{}">"#, n(3.0 * stroke)).ok();
        for b in &style.outlines {
            writeln!(
                out,
                r#"<path d="M {} {} h {} v {} h {} z"/>"#,
                n(b.lo(0).approx_f64()),
                n(-b.hi(1).approx_f64()),
                n(b.extents[0].approx_f64()),
                n(b.extents[1].approx_f64()),
                n(-b.extents[0].approx_f64())
            )
            .ok();
        }
        writeln!(out, "</g>").ok();
    }
    let radius = n(0.01 * w.max(h));
    if style.origin_marker {
        writeln!(out, r#"<circle id="origin" cx="0.000000" cy="0.000000" r="{radius}" fill="black"/>"#).ok();
    }
    if let Some(m) = &style.mark {
        writeln!(
            out,
            r#"<circle id="mark" cx="{}" cy="{}" r="{radius}" fill="none" stroke="crimson" stroke-width="{}"/>"#,
            n(m.coords[0].approx_f64()),
            n(-m.coords[1].approx_f64()),
            n(stroke)
        )
        .ok();
    }
    writeln!(out, "</svg>").ok();
    Ok(out)
}

/// Number of `<rect` elements in an SVG produced by [`render_svg`].
pub fn svg_rect_count(svg: &str) -> usize {
    svg.matches("<rect ").count()
}

/// Parses `x0,y0,...,x1,y1,...` (2d values) into a box.
pub fn parse_window(text: &str, dim: usize) -> crate::Result<Aabb<Rational>> {
    let values: Vec<Rational> = text
        .split(',')
        .map(|s| parse_rational(s.trim()).map_err(Error::Invalid))
        .collect::<crate::Result<_>>()?;
    if values.len() != 2 * dim {
        return Err(Error::Invalid(format!("window needs {} values, found {}", 2 * dim, values.len())));
    }
    let (lo, hi) = values.split_at(dim);
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return Err(Error::Invalid("window corners are out of order".into()));
    }
    let extents: Vec<Rational> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
    Ok(Aabb { min: Point::new(lo.to_vec()), extents })
}

/// `u64` view of a big integer for compact output, or its decimal string.
pub fn big_to_string(n: &BigInt) -> String {
    n.to_u64().map_or_else(|| n.to_string(), |v| v.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled::{example_patches, example_rule};
    use crate::spectral::substitution_matrix;

    #[test]
    fn rationals_parse_strictly() {
        assert_eq!(parse_rational("3"), Ok(Rational::from_i64(3)));
        assert_eq!(parse_rational("-6/4"), Ok(Rational::from_frac(-3, 2)));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("1/-2").is_err());
        assert!(parse_rational("1.5").is_err());
        assert!(parse_rational("").is_err());
        assert!(parse_rational(" 1").is_err());
    }

    #[test]
    fn bundled_document_matches_code() {
        let loaded = example_document();
        assert_eq!(loaded.rule, example_rule());
        let expected: BTreeMap<String, Patch<Rational>> =
            example_patches().into_iter().map(|(n, p)| (n, p.canonical())).collect();
        assert_eq!(loaded.named, expected);
        assert_eq!(substitution_matrix(&loaded.rule), SubstitutionMatrix::from_i64_rows(&[&[7, 2], &[1, 8]]));
    }

    #[test]
    fn round_trip() {
        let loaded = example_document();
        let text = serialize_rule(&loaded.rule, &loaded.named);
        let again = parse_rule(&text).unwrap();
        assert_eq!(again, loaded);
        assert_eq!(serialize_rule(&again.rule, &again.named), text);
    }

    #[test]
    fn error_categories() {
        assert!(matches!(parse_rule("{\"dimension\": 2,"), Err(RuleParseError::Json { line: 1, .. })));
        let mut doc = parse_document(EXAMPLE_DOCUMENT).unwrap();
        doc.inflation = "1/1".into();
        let err = doc.into_rule().unwrap_err();
        assert!(matches!(&err, RuleParseError::Validation(v) if v[0].contains("must exceed 1")), "{err}");

        let text = EXAMPLE_DOCUMENT.replacen("\"dimension\": 2", "\"dimension\": \"two\"", 1);
        assert!(matches!(parse_rule(&text), Err(RuleParseError::Schema { path, .. }) if path == "dimension"));

        let mut doc = parse_document(EXAMPLE_DOCUMENT).unwrap();
        doc.children.get_mut("T1").unwrap()[1].offset = vec!["3".into(), "0".into()];
        let err = doc.into_rule().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("children of T1") && text.contains("T1 at (3, 0)"), "{text}");

        let mut doc = parse_document(EXAMPLE_DOCUMENT).unwrap();
        doc.children.get_mut("T2").unwrap()[0].child = "T9".into();
        assert!(matches!(doc.into_rule(), Err(RuleParseError::Schema { path, .. }) if path == "children.T2[0].child"));
    }

    #[test]
    fn points_accept_integers_and_fractions() {
        let pts = parse_points(r#"[[0, "1/2"], ["-3", 4]]"#).unwrap();
        assert_eq!(pts[0].coords[1], Rational::half());
        assert!(parse_points("[[0.5, 1]]").is_err());
        assert!(parse_points("[[0, 1], [2]]").is_err());
    }

    #[test]
    fn svg_shapes() {
        let rule = example_rule();
        let empty = render_svg(&Patch::empty(), &rule.prototiles, &SvgStyle::default()).unwrap();
        assert!(empty.contains("<g id=\"tiles\"") && empty.ends_with("</svg>\n"));
        assert_eq!(svg_rect_count(&empty), 0);
        let child = rule.substitute(&Patch::single(0, Point::origin(2))).unwrap();
        let svg = render_svg(&child, &rule.prototiles, &SvgStyle::default()).unwrap();
        assert_eq!(svg_rect_count(&svg), 8);
        assert_eq!(svg.matches("data-tile=\"T2\"").count(), 1);
        let line = Prototile::new("I", vec![Rational::from_i64(1)]).unwrap();
        assert!(render_svg(&Patch::single(0, Point::origin(1)), &[line], &SvgStyle::default()).is_err());
    }

    #[test]
    fn decimals_have_no_negative_zero() {
        assert_eq!(decimal(-0.0000001, 6), "0.000000");
        assert_eq!(decimal(-1.5, 2), "-1.50");
    }

    #[test]
    fn windows_parse() {
        let w = parse_window("0,0,3/2,2", 2).unwrap();
        assert_eq!(w.extents, vec![Rational::from_frac(3, 2), Rational::from_i64(2)]);
        assert!(parse_window("0,0,1", 2).is_err());
        assert!(parse_window("2,0,1,1", 2).is_err());
    }
}
