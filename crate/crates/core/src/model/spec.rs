use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::feasibility::{build_test_set, CovariateExpansion, Term, TestSet, TestSetStrategy};
use crate::linalg::{pair_count, Matrix, PairLayout};

/// Scale of a latent dimension: estimated, or fixed at 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Free,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimSpec {
    pub name: String,
    pub items: usize,
    /// Defaults to free for multi-item dims and fixed for single items.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
}

impl DimSpec {
    pub fn scale(&self) -> Scale {
        self.scale.unwrap_or(if self.items > 1 { Scale::Free } else { Scale::Fixed })
    }

    pub fn is_multi_item(&self) -> bool {
        self.items > 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSideSpec {
    pub name: String,
    pub dims: Vec<String>,
}

/// A correlation coefficient constrained to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedAlpha {
    /// `"<dimA>:<dimB>"`.
    pub pair: String,
    pub covariate: String,
}

/// Serialized form of [`ModelSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpecDoc {
    pub dims: Vec<DimSpec>,
    pub class_sides: Vec<ClassSideSpec>,
    /// Model covariates `X`: `"const"`, a data column `"z"`, `"z^2"` or `"a*b"`.
    pub covariates: Vec<String>,
    pub mean_covariates: Vec<String>,
    pub corr_covariates: Vec<String>,
    pub class_covariates: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed_zero_alpha: Vec<FixedAlpha>,
}

/// Validated model description. Dimensions keep their declaration order,
/// which is also the order of `η`, `β` columns and the correlation matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecDoc", into = "ModelSpecDoc")]
pub struct ModelSpec {
    doc: ModelSpecDoc,
    dim_side: Vec<usize>,
    side_dims: [Vec<usize>; 2],
    item_offset: Vec<usize>,
    total_items: usize,
    base_names: Vec<String>,
    expansion: CovariateExpansion,
    mean_cov: Vec<usize>,
    corr_cov: Vec<usize>,
    class_cov: Vec<usize>,
    alpha_free: Vec<bool>,
}

pub const CELL_NAMES: [&str; 4] = ["00", "01", "10", "11"];

fn parse_term(raw: &str, base: &mut Vec<String>) -> Result<Term, ModelError> {
    let s = raw.trim();
    let mut var = |name: &str| -> Result<usize, ModelError> {
        let name = name.trim();
        if name.is_empty() || name == "const" || name == "1" {
            return Err(ModelError::Invalid(format!("bad covariate term {raw:?}")));
        }
        Ok(match base.iter().position(|b| b == name) {
            Some(i) => i + 1,
            None => {
                base.push(name.to_string());
                base.len()
            }
        })
    };
    if s == "const" || s == "1" {
        return Ok(Term::Copy(0));
    }
    if let Some(v) = s.strip_suffix("^2") {
        return Ok(Term::Square(var(v)?));
    }
    if let Some((a, b)) = s.split_once('*') {
        let (i, j) = (var(a)?, var(b)?);
        return Ok(if i == j { Term::Square(i) } else { Term::Product(i, j) });
    }
    Ok(Term::Copy(var(s)?))
}

fn resolve(names: &[String], all: &[String], what: &str) -> Result<Vec<usize>, ModelError> {
    let mut out = Vec::with_capacity(names.len());
    for n in names {
        let i = all
            .iter()
            .position(|c| c == n)
            .ok_or_else(|| ModelError::Invalid(format!("{what} covariate {n:?} is not declared")))?;
        if out.contains(&i) {
            return Err(ModelError::Invalid(format!("{what} covariate {n:?} listed twice")));
        }
        out.push(i);
    }
    Ok(out)
}

impl TryFrom<ModelSpecDoc> for ModelSpec {
    type Error = ModelError;

    fn try_from(doc: ModelSpecDoc) -> Result<Self, ModelError> {
        let k = doc.dims.len();
        if k < 2 {
            return Err(ModelError::Invalid("at least two latent dimensions are required".into()));
        }
        for (i, d) in doc.dims.iter().enumerate() {
            if d.name.is_empty() || d.name.contains([':', '.', ',']) {
                return Err(ModelError::Invalid(format!(
                    "dimension name {:?} must be non-empty without ':', '.' or ','",
                    d.name
                )));
            }
            if doc.dims[..i].iter().any(|e| e.name == d.name) {
                return Err(ModelError::Invalid(format!("duplicate dimension {:?}", d.name)));
            }
            if d.items == 0 {
                return Err(ModelError::Invalid(format!("dimension {:?} has no items", d.name)));
            }
            if d.items == 1 && d.scale() == Scale::Free {
                return Err(ModelError::Invalid(format!(
                    "single-item dimension {:?} must have its scale fixed at 1",
                    d.name
                )));
            }
        }
        if doc.class_sides.len() != 2 {
            return Err(ModelError::Invalid(format!(
                "exactly two class sides are required, found {}",
                doc.class_sides.len()
            )));
        }
        let mut dim_side = vec![usize::MAX; k];
        let mut side_dims: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (s, side) in doc.class_sides.iter().enumerate() {
            if side.dims.is_empty() {
                return Err(ModelError::Invalid(format!("class side {:?} has no dimensions", side.name)));
            }
            for name in &side.dims {
                let d = doc
                    .dims
                    .iter()
                    .position(|x| &x.name == name)
                    .ok_or_else(|| ModelError::Invalid(format!("class side refers to unknown dimension {name:?}")))?;
                if dim_side[d] != usize::MAX {
                    return Err(ModelError::Invalid(format!("dimension {name:?} belongs to two class sides")));
                }
                dim_side[d] = s;
                side_dims[s].push(d);
            }
        }
        if let Some(d) = dim_side.iter().position(|&s| s == usize::MAX) {
            return Err(ModelError::Invalid(format!(
                "dimension {:?} is not assigned to a class side",
                doc.dims[d].name
            )));
        }
        for s in &mut side_dims {
            s.sort_unstable();
        }

        if doc.covariates.first().map(String::as_str) != Some("const") {
            return Err(ModelError::Invalid("the first covariate must be \"const\"".into()));
        }
        let mut base = Vec::new();
        let mut terms = Vec::with_capacity(doc.covariates.len());
        for (i, c) in doc.covariates.iter().enumerate() {
            if doc.covariates[..i].contains(c) {
                return Err(ModelError::Invalid(format!("covariate {c:?} declared twice")));
            }
            terms.push(parse_term(c, &mut base)?);
        }
        if terms[1..].contains(&Term::Copy(0)) {
            return Err(ModelError::Invalid("the constant may only be declared once".into()));
        }
        let expansion = CovariateExpansion::new(base.len() + 1, terms)
            .map_err(|e| ModelError::Invalid(e.to_string()))?;

        let mean_cov = resolve(&doc.mean_covariates, &doc.covariates, "mean")?;
        let corr_cov = resolve(&doc.corr_covariates, &doc.covariates, "correlation")?;
        let class_cov = resolve(&doc.class_covariates, &doc.covariates, "class")?;
        for (list, what) in [(&mean_cov, "mean"), (&corr_cov, "correlation"), (&class_cov, "class")] {
            if list.is_empty() {
                return Err(ModelError::Invalid(format!("{what} model has no covariates")));
            }
        }
        if corr_cov[0] != 0 {
            return Err(ModelError::Invalid(
                "the correlation model must list \"const\" first".into(),
            ));
        }

        let mut item_offset = Vec::with_capacity(k);
        let mut total = 0;
        for d in &doc.dims {
            item_offset.push(total);
            total += d.items;
        }

        let layout = PairLayout::new(k);
        let q = corr_cov.len();
        let mut alpha_free = vec![true; layout.len() * q];
        for fz in &doc.fixed_zero_alpha {
            let l = layout
                .iter()
                .position(|(r, c)| format!("{}:{}", doc.dims[c].name, doc.dims[r].name) == fz.pair)
                .ok_or_else(|| ModelError::Invalid(format!("unknown correlation pair {:?}", fz.pair)))?;
            let m = corr_cov
                .iter()
                .position(|&i| doc.covariates[i] == fz.covariate)
                .ok_or_else(|| {
                    ModelError::Invalid(format!(
                        "{:?} is not a correlation covariate",
                        fz.covariate
                    ))
                })?;
            alpha_free[l * q + m] = false;
        }

        Ok(Self {
            doc,
            dim_side,
            side_dims,
            item_offset,
            total_items: total,
            base_names: base,
            expansion,
            mean_cov,
            corr_cov,
            class_cov,
            alpha_free,
        })
    }
}

impl From<ModelSpec> for ModelSpecDoc {
    fn from(s: ModelSpec) -> Self {
        s.doc
    }
}

impl ModelSpec {
    pub fn from_doc(doc: ModelSpecDoc) -> Result<Self, ModelError> {
        Self::try_from(doc)
    }

    pub fn doc(&self) -> &ModelSpecDoc {
        &self.doc
    }

    pub fn dims(&self) -> &[DimSpec] {
        &self.doc.dims
    }

    /// Number of continuous latent dimensions.
    pub fn k(&self) -> usize {
        self.doc.dims.len()
    }

    pub fn pairs(&self) -> usize {
        pair_count(self.k())
    }

    pub fn pair_layout(&self) -> PairLayout {
        PairLayout::new(self.k())
    }

    /// `"<dim col>:<dim row>"` for pair `l`.
    pub fn pair_name(&self, l: usize) -> String {
        let (r, c) = self.pair_layout().position(l);
        format!("{}:{}", self.doc.dims[c].name, self.doc.dims[r].name)
    }

    pub fn side_of(&self, dim: usize) -> usize {
        self.dim_side[dim]
    }

    pub fn side_dims(&self, side: usize) -> &[usize] {
        &self.side_dims[side]
    }

    pub fn side_name(&self, side: usize) -> &str {
        &self.doc.class_sides[side].name
    }

    pub fn item_offset(&self, dim: usize) -> usize {
        self.item_offset[dim]
    }

    pub fn total_items(&self) -> usize {
        self.total_items
    }

    /// Items belonging to class side `side`, as a range per dim.
    pub fn side_item_ranges(&self, side: usize) -> impl Iterator<Item = std::ops::Range<usize>> + '_ {
        self.side_dims[side]
            .iter()
            .map(move |&d| self.item_offset[d]..self.item_offset[d] + self.doc.dims[d].items)
    }

    pub fn item_column_name(&self, dim: usize, j: usize) -> String {
        format!("{}_{}", self.doc.dims[dim].name, j + 1)
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.doc.covariates
    }

    /// Names of the non-constant base variables read from data.
    pub fn base_names(&self) -> &[String] {
        &self.base_names
    }

    pub fn expansion(&self) -> &CovariateExpansion {
        &self.expansion
    }

    pub fn mean_cov(&self) -> &[usize] {
        &self.mean_cov
    }

    pub fn corr_cov(&self) -> &[usize] {
        &self.corr_cov
    }

    pub fn class_cov(&self) -> &[usize] {
        &self.class_cov
    }

    /// Test set in correlation-model coordinates for base data `z`.
    pub fn corr_test_set(&self, z: &Matrix, strategy: &TestSetStrategy) -> Result<TestSet, ModelError> {
        Ok(build_test_set(self.expansion(), z, strategy)?.select_columns(self.corr_cov())?)
    }

    pub fn is_alpha_free(&self, l: usize, m: usize) -> bool {
        self.alpha_free[l * self.corr_cov.len() + m]
    }

    pub fn free_scale_dims(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.k()).filter(|&d| self.doc.dims[d].scale() == Scale::Free)
    }

    /// Number of single-item dimensions.
    pub fn single_item_dims(&self) -> usize {
        self.doc.dims.iter().filter(|d| !d.is_multi_item()).count()
    }
}
