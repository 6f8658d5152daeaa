use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::dataio::raw::Interaction;
use crate::error::{Error, Result};
use crate::numerics::SparseRow;

/// Users need a validation item, a test item, and at least one training item
/// in each domain.
pub const MIN_USER_INTERACTIONS: usize = 3;

/// Binary user×item matrix for one domain.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionMatrix {
    user_tokens: Vec<String>,
    item_tokens: Vec<String>,
    rows: Vec<SparseRow>,
    user_index: HashMap<String, usize>,
    item_index: HashMap<String, usize>,
}

impl InteractionMatrix {
    pub fn new(
        user_tokens: Vec<String>,
        item_tokens: Vec<String>,
        rows: Vec<SparseRow>,
    ) -> Result<Self> {
        if rows.len() != user_tokens.len() {
            return Err(Error::Format(format!(
                "{} rows for {} users",
                rows.len(),
                user_tokens.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.dim() != item_tokens.len()) {
            return Err(Error::Format(format!(
                "row dim {} does not match {} items",
                r.dim(),
                item_tokens.len()
            )));
        }
        let user_index = index_of(&user_tokens, "user")?;
        let item_index = index_of(&item_tokens, "item")?;
        Ok(InteractionMatrix {
            user_tokens,
            item_tokens,
            rows,
            user_index,
            item_index,
        })
    }

    pub fn n_users(&self) -> usize {
        self.user_tokens.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_tokens.len()
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, user: usize) -> &SparseRow {
        &self.rows[user]
    }

    pub fn user_tokens(&self) -> &[String] {
        &self.user_tokens
    }

    pub fn item_tokens(&self) -> &[String] {
        &self.item_tokens
    }

    pub fn user_row(&self, token: &str) -> Option<usize> {
        self.user_index.get(token).copied()
    }

    pub fn item_col(&self, token: &str) -> Option<usize> {
        self.item_index.get(token).copied()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(SparseRow::nnz).sum()
    }

    pub fn density(&self) -> f64 {
        let cells = self.n_users() as f64 * self.n_items() as f64;
        if cells == 0.0 {
            0.0
        } else {
            self.nnz() as f64 / cells
        }
    }

    pub(crate) fn into_parts(self) -> (Vec<String>, Vec<String>, Vec<SparseRow>) {
        (self.user_tokens, self.item_tokens, self.rows)
    }
}

fn index_of(tokens: &[String], what: &str) -> Result<HashMap<String, usize>> {
    let mut m = HashMap::with_capacity(tokens.len());
    for (i, t) in tokens.iter().enumerate() {
        if m.insert(t.clone(), i).is_some() {
            return Err(Error::Format(format!("duplicate {what} token `{t}`")));
        }
    }
    Ok(m)
}

/// Restricts two domains to their shared users and builds one matrix per
/// domain over an identical, token-sorted user ordering.
///
/// Users with fewer than [`MIN_USER_INTERACTIONS`] interactions in either
/// domain are dropped; item columns are indexed per domain over the items
/// the surviving users touch, in token order.
pub fn pair_domains(
    a: &[Interaction],
    b: &[Interaction],
) -> Result<(InteractionMatrix, InteractionMatrix)> {
    let by_user_a = group_by_user(a);
    let by_user_b = group_by_user(b);
    let shared: Vec<&str> = by_user_a
        .keys()
        .filter(|u| by_user_b.contains_key(*u))
        .copied()
        .collect();
    if shared.is_empty() {
        return Err(Error::Pairing("the two domains share no users".into()));
    }
    let kept: Vec<&str> = shared
        .into_iter()
        .filter(|u| {
            by_user_a[u].len() >= MIN_USER_INTERACTIONS
                && by_user_b[u].len() >= MIN_USER_INTERACTIONS
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::Pairing(format!(
            "no shared user has {MIN_USER_INTERACTIONS}+ interactions in both domains"
        )));
    }
    let users: Vec<String> = kept.iter().map(|u| u.to_string()).collect();
    let ma = build_matrix(&users, &kept, &by_user_a)?;
    let mb = build_matrix(&users, &kept, &by_user_b)?;
    Ok((ma, mb))
}

fn group_by_user(records: &[Interaction]) -> BTreeMap<&str, BTreeSet<&str>> {
    let mut m: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in records {
        m.entry(r.user.as_str())
            .or_default()
            .insert(r.item.as_str());
    }
    m
}

fn build_matrix(
    users: &[String],
    kept: &[&str],
    by_user: &BTreeMap<&str, BTreeSet<&str>>,
) -> Result<InteractionMatrix> {
    let items: BTreeSet<&str> = kept
        .iter()
        .flat_map(|u| by_user[u].iter().copied())
        .collect();
    let item_tokens: Vec<String> = items.iter().map(|s| s.to_string()).collect();
    let col: HashMap<&str, u32> = items
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, i as u32))
        .collect();
    let rows = kept
        .iter()
        .map(|u| {
            let mut idx: Vec<u32> = by_user[u].iter().map(|t| col[t]).collect();
            idx.sort_unstable();
            SparseRow::binary(item_tokens.len(), idx)
        })
        .collect::<Result<Vec<_>>>()?;
    InteractionMatrix::new(users.to_vec(), item_tokens, rows)
}
