use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::netgraph::{AttributeTable, PopulationGraph};

/// One participant of a recruitment forest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ForestEntry {
    /// Index into the node universe the forest was drawn from (graph node
    /// index for simulated forests, entry index for loaded ones).
    pub node: usize,
    pub id: String,
    pub seed_index: usize,
    pub wave: u32,
    /// Entry index of the recruiter; `None` for seeds.
    pub recruiter: Option<usize>,
    pub degree: u32,
}

/// Directed recruitment trees. Entries are stored in recruitment order and
/// referenced by their position in that order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RecruitmentForest {
    entries: Vec<ForestEntry>,
    children: Vec<Vec<usize>>,
    seeds: Vec<usize>,
    reseeds: usize,
    truncated: usize,
}

/// One row of an externally supplied forest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestRecord {
    pub id: String,
    pub recruiter_id: Option<String>,
    pub degree: u32,
    /// Checked against the reconstructed wave when present.
    pub wave: Option<u32>,
}

impl RecruitmentForest {
    pub(crate) fn push_seed(&mut self, node: usize, id: String, degree: u32) -> usize {
        let e = self.entries.len();
        self.entries.push(ForestEntry {
            node,
            id,
            seed_index: self.seeds.len(),
            wave: 0,
            recruiter: None,
            degree,
        });
        self.children.push(Vec::new());
        self.seeds.push(e);
        e
    }

    pub(crate) fn push_recruit(&mut self, recruiter: usize, node: usize, id: String, degree: u32) -> usize {
        let e = self.entries.len();
        let parent = &self.entries[recruiter];
        self.entries.push(ForestEntry {
            node,
            id,
            seed_index: parent.seed_index,
            wave: parent.wave + 1,
            recruiter: Some(recruiter),
            degree,
        });
        self.children.push(Vec::new());
        self.children[recruiter].push(e);
        e
    }

    pub(crate) fn note_reseed(&mut self) {
        self.reseeds += 1;
    }

    pub(crate) fn note_truncated(&mut self) {
        self.truncated += 1;
    }

    /// Reconstructs a forest from `(id, recruiter, degree)` rows. Row order
    /// becomes recruitment order; waves and seed indices are derived from
    /// the recruiter links.
    pub fn from_records(records: Vec<ForestRecord>) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.degree == 0 {
                return Err(Error::InvalidData(format!("participant `{}` has degree 0", r.id)));
            }
            if index.insert(r.id.as_str(), i).is_some() {
                return Err(Error::InvalidData(format!("duplicate participant id `{}`", r.id)));
            }
        }
        let mut parent = vec![None; records.len()];
        let mut children = vec![Vec::new(); records.len()];
        let mut seeds = Vec::new();
        for (i, r) in records.iter().enumerate() {
            match &r.recruiter_id {
                None => seeds.push(i),
                Some(p) => {
                    let &j = index.get(p.as_str()).ok_or_else(|| {
                        Error::InvalidData(format!("recruiter `{p}` of `{}` is not a participant", r.id))
                    })?;
                    parent[i] = Some(j);
                    children[j].push(i);
                }
            }
        }

        let mut wave = vec![u32::MAX; records.len()];
        let mut seed_index = vec![usize::MAX; records.len()];
        let mut queue = VecDeque::new();
        for (s, &root) in seeds.iter().enumerate() {
            wave[root] = 0;
            seed_index[root] = s;
            queue.push_back(root);
        }
        while let Some(u) = queue.pop_front() {
            for &v in &children[u] {
                wave[v] = wave[u] + 1;
                seed_index[v] = seed_index[u];
                queue.push_back(v);
            }
        }
        if let Some(i) = wave.iter().position(|&w| w == u32::MAX) {
            return Err(Error::InvalidData(format!(
                "participant `{}` is on a recruitment cycle",
                records[i].id
            )));
        }

        let mut entries = Vec::with_capacity(records.len());
        for (i, r) in records.into_iter().enumerate() {
            if let Some(w) = r.wave {
                if w != wave[i] {
                    return Err(Error::InvalidData(format!(
                        "participant `{}` has wave {w}, recruiter links imply {}",
                        r.id, wave[i]
                    )));
                }
            }
            entries.push(ForestEntry {
                node: i,
                id: r.id,
                seed_index: seed_index[i],
                wave: wave[i],
                recruiter: parent[i],
                degree: r.degree,
            });
        }
        Ok(Self {
            entries,
            children,
            seeds,
            reseeds: 0,
            truncated: 0,
        })
    }

    /// Full forest of `s` seeds in which every participant above wave `h`
    /// recruits exactly `c` others. Ids are entry indices, degrees are 1.
    pub fn balanced(s: usize, c: usize, h: u32) -> Self {
        let mut forest = RecruitmentForest::default();
        for _ in 0..s {
            let id = forest.len().to_string();
            let root = forest.push_seed(forest.len(), id, 1);
            let mut frontier = vec![root];
            for _ in 0..h {
                let mut next = Vec::new();
                for &p in &frontier {
                    for _ in 0..c {
                        let id = forest.len().to_string();
                        next.push(forest.push_recruit(p, forest.len(), id, 1));
                    }
                }
                frontier = next;
            }
        }
        forest
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ForestEntry] {
        &self.entries
    }

    pub fn entry(&self, e: usize) -> &ForestEntry {
        &self.entries[e]
    }

    /// Recruits of entry `e`, in recruitment order.
    pub fn children(&self, e: usize) -> &[usize] {
        &self.children[e]
    }

    pub fn seeds(&self) -> &[usize] {
        &self.seeds
    }

    /// Number of seeds added after the initial draw because every chain died.
    pub fn reseeds(&self) -> usize {
        self.reseeds
    }

    /// Number of drawn recruits dropped because the target size was reached.
    pub fn truncated(&self) -> usize {
        self.truncated
    }

    pub fn max_wave(&self) -> u32 {
        self.entries.iter().map(|e| e.wave).max().unwrap_or(0)
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.degree).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }

    /// Entries with at least one recruit, in recruitment order.
    pub fn recruiters(&self) -> Vec<usize> {
        (0..self.len()).filter(|&e| !self.children[e].is_empty()).collect()
    }

    pub fn n_recruiters(&self) -> usize {
        self.children.iter().filter(|c| !c.is_empty()).count()
    }

    /// Per-entry attribute values, looked up through each entry's node.
    pub fn values_for(&self, column: &[u8]) -> Vec<u8> {
        self.entries.iter().map(|e| column[e.node]).collect()
    }

    pub fn values_for_column(&self, attrs: &AttributeTable, name: &str) -> Result<Vec<u8>> {
        Ok(self.values_for(attrs.column(name)?))
    }

    /// `(c, h)` when every recruiter has exactly `c` recruits and every
    /// leaf sits at wave `h`; `None` otherwise or when nobody recruited.
    pub fn balanced_shape(&self) -> Option<(usize, u32)> {
        let recruiters = self.recruiters();
        let c = self.children[*recruiters.first()?].len();
        if recruiters.iter().any(|&r| self.children[r].len() != c) {
            return None;
        }
        let h = self.max_wave();
        let leaves_level = (0..self.len())
            .filter(|&e| self.children[e].is_empty())
            .all(|e| self.entries[e].wave == h);
        leaves_level.then_some((c, h))
    }

    /// Verifies the structural invariants. With a graph, recruiter/recruit
    /// pairs must be edges and degrees must match; `distinct` demands that
    /// no node appears twice.
    pub fn check_invariants(
        &self,
        graph: Option<&PopulationGraph>,
        distinct: bool,
        max_coupons: Option<usize>,
    ) -> std::result::Result<(), String> {
        let mut seen = HashMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            match e.recruiter {
                None => {
                    if e.wave != 0 || self.seeds.get(e.seed_index) != Some(&i) {
                        return Err(format!("seed entry {i} malformed"));
                    }
                }
                Some(r) => {
                    if r >= i {
                        return Err(format!("entry {i} recruited by later entry {r}"));
                    }
                    let p = &self.entries[r];
                    if e.wave != p.wave + 1 || e.seed_index != p.seed_index {
                        return Err(format!("entry {i} has inconsistent wave or seed"));
                    }
                    if !self.children[r].contains(&i) {
                        return Err(format!("entry {i} missing from its recruiter's list"));
                    }
                    if let Some(g) = graph {
                        if !g.has_edge(p.node, e.node) {
                            return Err(format!("recruitment {r} -> {i} is not a graph edge"));
                        }
                    }
                }
            }
            if e.degree == 0 {
                return Err(format!("entry {i} has degree 0"));
            }
            if let Some(g) = graph {
                if g.degree(e.node) != e.degree as usize || g.node_id(e.node) != e.id {
                    return Err(format!("entry {i} disagrees with the graph"));
                }
            }
            if distinct && seen.insert(e.node, i).is_some() {
                return Err(format!("node {} sampled twice", e.id));
            }
            if let Some(c) = max_coupons {
                if self.children[i].len() > c {
                    return Err(format!("entry {i} has more than {c} recruits"));
                }
            }
        }
        let seed_count = self.entries.iter().filter(|e| e.recruiter.is_none()).count();
        if seed_count != self.seeds.len() {
            return Err("seed list out of sync".into());
        }
        Ok(())
    }
}

/// Entries with at least one recruit, in recruitment order; `n_r` is the
/// length of the result.
pub fn recruiters_of(forest: &RecruitmentForest) -> Vec<usize> {
    forest.recruiters()
}

/// Writes `id,seed_index,wave,recruiter_id,degree` rows in recruitment order.
pub fn write_forest_csv<W: Write>(forest: &RecruitmentForest, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "seed_index", "wave", "recruiter_id", "degree"])?;
    for e in forest.entries() {
        let recruiter = e.recruiter.map(|r| forest.entry(r).id.as_str()).unwrap_or("");
        w.write_record([
            e.id.as_str(),
            &e.seed_index.to_string(),
            &e.wave.to_string(),
            recruiter,
            &e.degree.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("forest csv", e))?;
    Ok(())
}

/// Reads a forest CSV. Columns `id`, `recruiter_id` and `degree` are
/// required; `wave` is checked when present and `seed_index` is
/// reconstructed. Ids must be distinct.
pub fn read_forest_csv<R: Read>(reader: R) -> Result<RecruitmentForest> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(id_col), Some(rec_col), Some(deg_col)) = (col("id"), col("recruiter_id"), col("degree"))
    else {
        return Err(Error::InvalidData(
            "forest CSV needs `id`, `recruiter_id` and `degree` columns".into(),
        ));
    };
    let wave_col = col("wave");

    let mut records = Vec::new();
    for (r, row) in rdr.records().enumerate() {
        let row = row?;
        let line = r + 2;
        let field = |c: usize| row.get(c).unwrap_or("");
        let parse_err = |what: &str, v: &str| Error::Parse {
            path: "forest".into(),
            line,
            message: format!("bad {what} `{v}`"),
        };
        let degree = field(deg_col)
            .parse::<u32>()
            .map_err(|_| parse_err("degree", field(deg_col)))?;
        let wave = match wave_col.map(field) {
            Some(w) if !w.is_empty() => Some(w.parse::<u32>().map_err(|_| parse_err("wave", w))?),
            _ => None,
        };
        let recruiter = field(rec_col);
        records.push(ForestRecord {
            id: field(id_col).to_string(),
            recruiter_id: (!recruiter.is_empty()).then(|| recruiter.to_string()),
            degree,
            wave,
        });
    }
    RecruitmentForest::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn mno_forest() -> RecruitmentForest {
        // M -> {N, O}, N -> {P}
        let rec = |id: &str, r: Option<&str>| ForestRecord {
            id: id.into(),
            recruiter_id: r.map(str::to_string),
            degree: 1,
            wave: None,
        };
        RecruitmentForest::from_records(vec![
            rec("M", None),
            rec("N", Some("M")),
            rec("O", Some("M")),
            rec("P", Some("N")),
        ])
        .unwrap()
    }

    #[test]
    fn recruiters_in_order() {
        let f = mno_forest();
        let ids: Vec<_> = recruiters_of(&f).iter().map(|&e| f.entry(e).id.clone()).collect();
        assert_eq!(ids, ["M", "N"]);
        assert_eq!(f.entry(3).wave, 2);
    }

    #[test]
    fn isolated_seeds_have_no_recruiters() {
        let f = RecruitmentForest::balanced(3, 2, 0);
        assert!(recruiters_of(&f).is_empty());
        assert_eq!(f.balanced_shape(), None);
    }

    #[test]
    fn balanced_recruiter_count() {
        let f = RecruitmentForest::balanced(1, 2, 2);
        assert_eq!(f.len(), 7);
        assert_eq!(f.n_recruiters(), 3);
        assert_eq!(f.balanced_shape(), Some((2, 2)));
        assert!(f.check_invariants(None, true, Some(2)).is_ok());
        assert_eq!(mno_forest().balanced_shape(), None);
    }

    #[test]
    fn csv_round_trip() {
        let f = mno_forest();
        let mut buf = Vec::new();
        write_forest_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,seed_index,wave,recruiter_id,degree\nM,0,0,,1\n"));
        assert_eq!(read_forest_csv(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn minimal_columns_are_enough() {
        let f = read_forest_csv("id,recruiter_id,degree\nb,a,3\na,,2\n".as_bytes()).unwrap();
        assert_eq!(f.seeds(), &[1]);
        assert_eq!(f.entry(0).wave, 1);
        assert_eq!(f.children(1), &[0]);
    }

    #[test]
    fn bad_forests_are_rejected() {
        let cases = [
            "id,recruiter_id,degree\na,,1\na,,1\n",
            "id,recruiter_id,degree\na,x,1\n",
            "id,recruiter_id,degree\na,b,1\nb,a,1\n",
            "id,recruiter_id,degree\na,,0\n",
            "id,recruiter_id,degree,wave\na,,1,0\nb,a,1,5\n",
            "id,degree\na,1\n",
        ];
        for c in cases {
            assert!(read_forest_csv(c.as_bytes()).is_err(), "{c}");
        }
    }
}
