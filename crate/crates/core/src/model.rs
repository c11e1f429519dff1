//! Ensemble block models: storage, CSV ingestion, and the two-pit test model.
//!
//! Grades are held in memory as mass fractions (0.005 = 0.5%) and written to
//! disk as percent. Bench index is the block's `z` level, with `z` increasing
//! upwards, so the top bench of a pit has the largest `z`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Domain code reserved for barren rock.
pub const WASTE_DOMAIN: i32 = 0;

/// Stage id of blocks outside every designed pit.
pub const UNMINED_STAGE: u32 = 0;

const FIXED_COLUMNS: [&str; 6] = ["x", "y", "z", "domain", "density", "stage"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub index: [u32; 3],
    pub domain: i32,
    /// Tonnes per cubic metre.
    pub density: f64,
    pub stage: u32,
}

impl Block {
    pub fn bench(&self) -> u32 {
        self.index[2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub dims: [u32; 3],
    pub block_size: [f64; 3],
    pub n_members: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_deg: Option<f64>,
}

/// A regular-grid block model carrying one grade per ensemble member.
#[derive(Debug, Clone)]
pub struct BlockModel {
    dims: [u32; 3],
    block_size: [f64; 3],
    blocks: Vec<Block>,
    /// Row-major `block × member` grade fractions.
    grades: Vec<f64>,
    n_members: usize,
    slope_deg: Option<f64>,
}

impl BlockModel {
    pub fn new(
        dims: [u32; 3],
        block_size: [f64; 3],
        blocks: Vec<Block>,
        grades: Vec<f64>,
        n_members: usize,
    ) -> Result<Self> {
        if n_members == 0 {
            return Err(Error::InvalidModel("ensemble has no members".into()));
        }
        if block_size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidModel(format!(
                "block size must be positive, got {block_size:?}"
            )));
        }
        if grades.len() != blocks.len() * n_members {
            return Err(Error::InvalidModel(format!(
                "grade matrix has {} entries, expected {} blocks x {} members",
                grades.len(),
                blocks.len(),
                n_members
            )));
        }
        let mut seen = HashSet::with_capacity(blocks.len());
        for (i, block) in blocks.iter().enumerate() {
            if (0..3).any(|a| block.index[a] >= dims[a]) {
                return Err(Error::InvalidModel(format!(
                    "block {i} index {:?} lies outside the grid {dims:?}",
                    block.index
                )));
            }
            if !seen.insert(block.index) {
                return Err(Error::InvalidModel(format!(
                    "duplicate block index {:?}",
                    block.index
                )));
            }
            if !(block.density.is_finite() && block.density > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "block {i} has non-positive density {}",
                    block.density
                )));
            }
            let row = &grades[i * n_members..(i + 1) * n_members];
            if let Some(g) = row.iter().find(|g| !(0.0..=1.0).contains(*g)) {
                return Err(Error::InvalidModel(format!(
                    "block {i} has grade {g} outside [0, 1]"
                )));
            }
            if block.domain == WASTE_DOMAIN && row.iter().any(|g| *g != 0.0) {
                return Err(Error::InvalidModel(format!(
                    "waste block {i} carries a non-zero grade"
                )));
            }
        }
        Ok(Self {
            dims,
            block_size,
            blocks,
            grades,
            n_members,
            slope_deg: None,
        })
    }

    pub fn with_slope(mut self, slope_deg: f64) -> Self {
        self.slope_deg = Some(slope_deg);
        self
    }

    pub fn dims(&self) -> [u32; 3] {
        self.dims
    }

    pub fn block_size(&self) -> [f64; 3] {
        self.block_size
    }

    pub fn slope_deg(&self) -> Option<f64> {
        self.slope_deg
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: usize) -> &Block {
        &self.blocks[id]
    }

    pub fn block_volume(&self) -> f64 {
        self.block_size.iter().product()
    }

    /// Tonnes of rock in block `id`.
    pub fn block_mass(&self, id: usize) -> f64 {
        self.blocks[id].density * self.block_volume()
    }

    /// Grade fractions of block `id`, one per ensemble member.
    pub fn block_grades(&self, id: usize) -> &[f64] {
        &self.grades[id * self.n_members..(id + 1) * self.n_members]
    }

    pub fn grade(&self, id: usize, member: usize) -> f64 {
        self.grades[id * self.n_members + member]
    }

    pub fn ore_block_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.domain != WASTE_DOMAIN)
            .count()
    }

    pub fn metadata(&self) -> ModelMetadata {
        ModelMetadata {
            dims: self.dims,
            block_size: self.block_size,
            n_members: self.n_members,
            slope_deg: self.slope_deg,
        }
    }
}

/// Sidecar metadata path for a model CSV (`model.csv` -> `model.json`).
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Reads a block model CSV and its JSON sidecar.
///
/// Without a sidecar the grid extent is inferred from the largest indices
/// and blocks are taken to be 1 m cubes.
pub fn load_block_model(path: &Path) -> Result<BlockModel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let headers = reader
        .headers()
        .map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })?
        .clone();
    for (i, name) in FIXED_COLUMNS.iter().enumerate() {
        if headers.get(i) != Some(*name) {
            return Err(Error::Format {
                path: path.into(),
                message: format!(
                    "missing column `{name}` at position {}; header must start with {}",
                    i + 1,
                    FIXED_COLUMNS.join(",")
                ),
            });
        }
    }
    let grade_columns: Vec<String> = headers.iter().skip(FIXED_COLUMNS.len()).map(String::from).collect();
    if grade_columns.is_empty() {
        return Err(Error::Format {
            path: path.into(),
            message: "no grade_NNN columns".into(),
        });
    }
    if let Some(bad) = grade_columns.iter().find(|c| !c.starts_with("grade_")) {
        return Err(Error::Format {
            path: path.into(),
            message: format!("unexpected column `{bad}`; expected grade_NNN"),
        });
    }
    let n_members = grade_columns.len();
    let width = FIXED_COLUMNS.len() + n_members;

    let mut blocks = Vec::new();
    let mut grades = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let record = record.map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })?;
        if record.len() != width {
            return Err(Error::Parse {
                path: path.into(),
                row,
                column: "*".into(),
                message: format!(
                    "expected {width} fields ({n_members} ensemble members), found {}",
                    record.len()
                ),
            });
        }
        let err = |col: &str, message: String| Error::Parse {
            path: path.into(),
            row,
            column: col.into(),
            message,
        };
        let field = |k: usize| record.get(k).unwrap_or("");
        let mut index = [0u32; 3];
        for (a, slot) in index.iter_mut().enumerate() {
            *slot = field(a)
                .parse()
                .map_err(|e| err(FIXED_COLUMNS[a], format!("`{}`: {e}", field(a))))?;
        }
        let domain: i32 = field(3)
            .parse()
            .map_err(|e| err("domain", format!("`{}`: {e}", field(3))))?;
        let density: f64 = field(4)
            .parse()
            .map_err(|e| err("density", format!("`{}`: {e}", field(4))))?;
        if !(density.is_finite() && density > 0.0) {
            return Err(err("density", format!("density must be positive, got {density}")));
        }
        let stage: u32 = field(5)
            .parse()
            .map_err(|e| err("stage", format!("`{}`: {e}", field(5))))?;
        if !seen.insert(index) {
            return Err(err("x", format!("duplicate block index {index:?}")));
        }
        for (m, column) in grade_columns.iter().enumerate() {
            let raw = field(FIXED_COLUMNS.len() + m);
            let pct: f64 = raw.parse().map_err(|e| err(column, format!("`{raw}`: {e}")))?;
            if !(0.0..=100.0).contains(&pct) {
                return Err(err(column, format!("grade {pct}% outside [0, 100]")));
            }
            if domain == WASTE_DOMAIN && pct != 0.0 {
                return Err(err(column, format!("waste block with grade {pct}%")));
            }
            grades.push(percent_to_fraction(pct));
        }
        blocks.push(Block {
            index,
            domain,
            density,
            stage,
        });
    }

    let meta_path = metadata_path(path);
    let meta: Option<ModelMetadata> = if meta_path.exists() {
        let f = File::open(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        Some(serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::json(&meta_path, e))?)
    } else {
        None
    };
    let (dims, block_size, slope) = match meta {
        Some(m) => {
            if m.n_members != n_members {
                return Err(Error::Format {
                    path: meta_path,
                    message: format!(
                        "metadata declares {} members but the CSV has {n_members} grade columns",
                        m.n_members
                    ),
                });
            }
            (m.dims, m.block_size, m.slope_deg)
        }
        None => {
            let mut dims = [0u32; 3];
            for b in &blocks {
                for (d, i) in dims.iter_mut().zip(b.index) {
                    *d = (*d).max(i + 1);
                }
            }
            (dims, [1.0; 3], None)
        }
    };
    let model = BlockModel::new(dims, block_size, blocks, grades, n_members)?;
    Ok(match slope {
        Some(s) => model.with_slope(s),
        None => model,
    })
}

/// Writes `path` (CSV, grades in percent) and its JSON sidecar.
pub fn save_block_model(model: &BlockModel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = FIXED_COLUMNS.join(",");
    for m in 0..model.n_members() {
        header.push_str(&format!(",grade_{:03}", m + 1));
    }
    writeln!(out, "{header}").map_err(io)?;
    let mut line = String::new();
    for (id, b) in model.blocks().iter().enumerate() {
        line.clear();
        line.push_str(&format!(
            "{},{},{},{},{},{}",
            b.index[0], b.index[1], b.index[2], b.domain, b.density, b.stage
        ));
        for g in model.block_grades(id) {
            line.push(',');
            line.push_str(&fraction_to_percent(*g).to_string());
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)?;

    let meta_path = metadata_path(path);
    let f = File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &model.metadata())
        .map_err(|e| Error::json(&meta_path, e))?;
    Ok(())
}

pub fn percent_to_fraction(pct: f64) -> f64 {
    pct / 100.0
}

/// The percent value whose `percent_to_fraction` is exactly `fraction`.
///
/// `fraction * 100.0` is not always such a value, so neighbouring floats are
/// probed until division by 100 lands back on `fraction`.
pub fn fraction_to_percent(fraction: f64) -> f64 {
    let guess = fraction * 100.0;
    if percent_to_fraction(guess) == fraction {
        return guess;
    }
    let (mut up, mut down) = (guess, guess);
    for _ in 0..8 {
        up = up.next_up();
        down = down.next_down();
        if percent_to_fraction(up) == fraction {
            return up;
        }
        if percent_to_fraction(down) == fraction {
            return down;
        }
    }
    guess
}

/// An evenly spaced grade ladder across the ensemble, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeLadder {
    pub low_pct: f64,
    pub high_pct: f64,
    /// Member 1 holds the high end and grades fall with member number.
    pub descending: bool,
}

impl GradeLadder {
    pub fn percent(&self, member: usize, n_members: usize) -> f64 {
        let span = self.high_pct - self.low_pct;
        let step = member as f64 / (n_members - 1) as f64;
        if self.descending {
            self.high_pct - span * step
        } else {
            self.low_pct + span * step
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestModelParams {
    /// Blocks per axis of each ore box.
    pub box_dims: [u32; 3],
    /// Benches of waste between the two boxes of a pit.
    pub waste_layer: u32,
    /// Benches of waste above the upper box.
    pub overburden: u32,
    /// Columns of untouched ground between the two pits.
    pub pit_gap: u32,
    pub slope_deg: f64,
    pub block_size: [f64; 3],
    pub density: f64,
    pub members: usize,
    pub east: GradeLadder,
    pub west: GradeLadder,
}

impl Default for TestModelParams {
    fn default() -> Self {
        Self {
            box_dims: [10, 40, 5],
            waste_layer: 1,
            overburden: 1,
            pit_gap: 2,
            slope_deg: 45.0,
            block_size: [10.0, 10.0, 10.0],
            density: 2.7,
            members: 10,
            east: GradeLadder {
                low_pct: 0.46,
                high_pct: 0.55,
                descending: true,
            },
            west: GradeLadder {
                low_pct: 0.41,
                high_pct: 0.50,
                descending: false,
            },
        }
    }
}

pub const EAST_STAGE: u32 = 1;
pub const WEST_STAGE: u32 = 2;
pub const ORE_DOMAIN: i32 = 1;

impl TestModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.box_dims.contains(&0) {
            return Err(Error::param("box_dims", "ore boxes must have non-zero size on every axis"));
        }
        if self.members < 2 {
            return Err(Error::param("members", "an ensemble needs at least two members"));
        }
        if !(self.slope_deg > 0.0 && self.slope_deg < 90.0) {
            return Err(Error::param("slope_deg", "slope angle must lie in (0, 90) degrees"));
        }
        let positive = |v: f64| v > 0.0;
        if !self.block_size.iter().all(|s| positive(*s)) || !positive(self.density) {
            return Err(Error::param("block_size", "block size and density must be positive"));
        }
        for (name, ladder) in [("east", &self.east), ("west", &self.west)] {
            if !(ladder.low_pct >= 0.0 && ladder.low_pct < ladder.high_pct && ladder.high_pct <= 100.0) {
                return Err(Error::InvalidParameter {
                    name,
                    message: format!(
                        "grade ladder must be strictly increasing within [0, 100]%, got [{}, {}]",
                        ladder.low_pct, ladder.high_pct
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn pit_height(&self) -> u32 {
        self.overburden + 2 * self.box_dims[2] + self.waste_layer
    }

    /// Horizontal widening, in blocks along `axis`, `k` benches above the pit floor.
    fn offset(&self, axis: usize, k: u32) -> u32 {
        let rise = k as f64 * self.block_size[2];
        let run = rise / self.slope_deg.to_radians().tan();
        (run / self.block_size[axis] + 1e-9).floor() as u32
    }
}

/// Builds the two-pit synthetic model: West pit (stage 2) at low `x`, East
/// pit (stage 1) at high `x`, each a slope-honouring cone around two ore
/// boxes separated by a waste layer. Only in-pit blocks are emitted.
pub fn generate_test_model(params: &TestModelParams) -> Result<BlockModel> {
    params.validate()?;
    let [bx, by, bz] = params.box_dims;
    let height = params.pit_height();
    let ox = params.offset(0, height - 1);
    let oy = params.offset(1, height - 1);
    let pit_x = bx + 2 * ox;
    let pit_y = by + 2 * oy;
    let dims = [2 * pit_x + params.pit_gap, pit_y, height];
    let upper_floor = bz + params.waste_layer;
    let members = params.members;

    let mut blocks = Vec::new();
    let mut grades = Vec::new();
    let pits = [
        (0, WEST_STAGE, params.west),
        (pit_x + params.pit_gap, EAST_STAGE, params.east),
    ];
    for (x0, stage, ladder) in pits {
        let ore_grades: Vec<f64> = (0..members)
            .map(|m| percent_to_fraction(ladder.percent(m, members)))
            .collect();
        for z in 0..height {
            let (wx, wy) = (params.offset(0, z), params.offset(1, z));
            for x in (x0 + ox - wx)..(x0 + ox + bx + wx) {
                for y in (oy - wy)..(oy + by + wy) {
                    let in_footprint = (x0 + ox..x0 + ox + bx).contains(&x) && (oy..oy + by).contains(&y);
                    let in_box = (z < bz) || (upper_floor..upper_floor + bz).contains(&z);
                    let ore = in_footprint && in_box;
                    blocks.push(Block {
                        index: [x, y, z],
                        domain: if ore { ORE_DOMAIN } else { WASTE_DOMAIN },
                        density: params.density,
                        stage,
                    });
                    if ore {
                        grades.extend_from_slice(&ore_grades);
                    } else {
                        grades.extend(std::iter::repeat_n(0.0, members));
                    }
                }
            }
        }
    }
    Ok(BlockModel::new(dims, params.block_size, blocks, grades, members)?.with_slope(params.slope_deg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn loads_small_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "x,y,z,domain,density,stage,grade_001,grade_002\n\
             0,0,0,1,2.7,1,0.5,0.4\n\
             1,0,0,1,2.7,1,0.6,0.5\n\
             0,1,0,0,2.5,1,0,0\n\
             1,1,0,0,2.5,0,0,0\n",
        );
        let m = load_block_model(&p).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.n_members(), 2);
        assert_eq!(m.dims(), [2, 2, 1]);
        assert_eq!(m.grade(0, 0), 0.005);
        assert_eq!(m.grade(1, 1), 0.005);
        assert_eq!(m.block_mass(2), 2.5);
    }

    #[test]
    fn negative_grade_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "m.csv",
            "x,y,z,domain,density,stage,grade_001\n0,0,0,1,2.7,1,0.5\n1,0,0,1,2.7,1,-0.1\n",
        );
        let err = load_block_model(&p).unwrap_err().to_string();
        assert!(err.contains("row 3"), "{err}");
        assert!(err.contains("grade_001"), "{err}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("x,y,z,domain,stage,grade_001\n0,0,0,1,1,0.5\n", "density"),
            ("x,y,z,domain,density,stage,grade_001,grade_002\n0,0,0,1,2.7,1,0.5\n", "row 2"),
            ("x,y,z,domain,density,stage,grade_001\n0,0,0,1,-2.7,1,0.5\n", "density"),
            ("x,y,z,domain,density,stage,grade_001\n0,0,0,1,2.7,1,0.5\n0,0,0,1,2.7,1,0.5\n", "duplicate"),
            ("x,y,z,domain,density,stage,grade_001\n0,0,0,0,2.7,1,0.5\n", "waste"),
        ];
        for (i, (text, needle)) in cases.iter().enumerate() {
            let p = write(dir.path(), &format!("bad{i}.csv"), text);
            let err = load_block_model(&p).unwrap_err().to_string();
            assert!(err.contains(needle), "case {i}: {err}");
        }
    }

    #[test]
    fn sidecar_member_count_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "m.csv", "x,y,z,domain,density,stage,grade_001\n0,0,0,1,2.7,1,0.5\n");
        write(
            dir.path(),
            "m.json",
            r#"{"dims":[1,1,1],"block_size":[10,10,10],"n_members":3}"#,
        );
        assert!(load_block_model(&p).is_err());
    }

    #[test]
    fn default_test_model_shape() {
        let m = generate_test_model(&TestModelParams::default()).unwrap();
        assert_eq!(m.ore_block_count(), 8000);
        assert_eq!(m.n_members(), 10);
        let waste = m.len() - m.ore_block_count();
        assert_eq!(waste, 18848);
        assert!(m.blocks().iter().all(|b| b.stage == EAST_STAGE || b.stage == WEST_STAGE));
        for stage in [EAST_STAGE, WEST_STAGE] {
            let ore = m
                .blocks()
                .iter()
                .filter(|b| b.stage == stage && b.domain == ORE_DOMAIN)
                .count();
            assert_eq!(ore, 4000);
        }
    }

    #[test]
    fn test_model_grade_ladders() {
        let m = generate_test_model(&TestModelParams::default()).unwrap();
        let east = m
            .blocks()
            .iter()
            .position(|b| b.stage == EAST_STAGE && b.domain == ORE_DOMAIN)
            .unwrap();
        let west = m
            .blocks()
            .iter()
            .position(|b| b.stage == WEST_STAGE && b.domain == ORE_DOMAIN)
            .unwrap();
        assert_eq!(m.grade(east, 0), percent_to_fraction(0.55));
        assert!((m.grade(east, 0) - 0.0055).abs() < 1e-18);
        assert!((m.grade(east, 9) - 0.0046).abs() < 1e-15);
        assert_eq!(m.grade(west, 0), percent_to_fraction(0.41));
        assert!((m.grade(west, 9) - 0.0050).abs() < 1e-15);
        for k in 0..9 {
            assert!((m.grade(east, k) - m.grade(east, k + 1) - 0.0001).abs() < 1e-15);
        }
        // every ore block of a pit is the same ladder
        for (id, b) in m.blocks().iter().enumerate() {
            match (b.domain, b.stage) {
                (WASTE_DOMAIN, _) => assert!(m.block_grades(id).iter().all(|g| *g == 0.0)),
                (_, EAST_STAGE) => assert_eq!(m.block_grades(id), m.block_grades(east)),
                _ => assert_eq!(m.block_grades(id), m.block_grades(west)),
            }
        }
    }

    #[test]
    fn ladders_are_anti_correlated() {
        let m = generate_test_model(&TestModelParams::default()).unwrap();
        let pick = |stage| {
            let id = m
                .blocks()
                .iter()
                .position(|b| b.stage == stage && b.domain == ORE_DOMAIN)
                .unwrap();
            m.block_grades(id).to_vec()
        };
        let (e, w) = (pick(EAST_STAGE), pick(WEST_STAGE));
        let n = e.len() as f64;
        let (me, mw) = (e.iter().sum::<f64>() / n, w.iter().sum::<f64>() / n);
        let cov: f64 = e.iter().zip(&w).map(|(a, b)| (a - me) * (b - mw)).sum();
        let ve: f64 = e.iter().map(|a| (a - me).powi(2)).sum();
        let vw: f64 = w.iter().map(|b| (b - mw).powi(2)).sum();
        let r = cov / (ve * vw).sqrt();
        assert!((r + 1.0).abs() < 1e-9, "r = {r}");
    }

    #[test]
    fn rejects_degenerate_params() {
        let p = TestModelParams {
            box_dims: [0, 10, 5],
            ..Default::default()
        };
        assert!(generate_test_model(&p).is_err());
        let p = TestModelParams {
            members: 1,
            ..Default::default()
        };
        assert!(generate_test_model(&p).is_err());
        let mut p = TestModelParams::default();
        p.east.low_pct = 0.6;
        assert!(generate_test_model(&p).is_err());
    }

    #[test]
    fn four_member_ladder() {
        let p = TestModelParams {
            members: 4,
            ..Default::default()
        };
        let m = generate_test_model(&p).unwrap();
        let east = m
            .blocks()
            .iter()
            .position(|b| b.stage == EAST_STAGE && b.domain == ORE_DOMAIN)
            .unwrap();
        let g = m.block_grades(east);
        assert_eq!(g.len(), 4);
        assert!((g[0] - 0.0055).abs() < 1e-15 && (g[3] - 0.0046).abs() < 1e-15);
        assert!((g[1] - 0.0052).abs() < 1e-15 && (g[2] - 0.0049).abs() < 1e-15);
    }

    #[test]
    fn save_load_round_trip() {
        let p = TestModelParams {
            box_dims: [2, 3, 2],
            members: 7,
            ..Default::default()
        };
        let m = generate_test_model(&p).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tm.csv");
        save_block_model(&m, &path).unwrap();
        let back = load_block_model(&path).unwrap();
        assert_eq!(back.dims(), m.dims());
        assert_eq!(back.blocks(), m.blocks());
        assert_eq!(back.slope_deg(), Some(45.0));
        for id in 0..m.len() {
            assert_eq!(back.block_grades(id), m.block_grades(id));
        }
    }

    proptest! {
        #[test]
        fn percent_conversion_is_exact(p in 0.0f64..=100.0) {
            let f = percent_to_fraction(p);
            let pct = fraction_to_percent(f);
            let text = pct.to_string();
            let parsed: f64 = text.parse().unwrap();
            prop_assert_eq!(percent_to_fraction(parsed), f);
        }
    }
}
