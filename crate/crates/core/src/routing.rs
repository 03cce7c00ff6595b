use crate::error::{Error, Result};
use crate::feeder::{Feeder, PhaseMode};

/// 0/1 routing matrix `R` (links x chargers), stored as per-charger routes
/// and per-link user sets. `R[l][i] = 1` iff link `l` carries charger `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutingMatrix {
    rows: usize,
    routes: Vec<Vec<usize>>,
    users: Vec<Vec<usize>>,
}

impl RoutingMatrix {
    /// Builds `R` from each charger's list of links. Every charger needs at
    /// least one link.
    pub fn from_routes(rows: usize, routes: Vec<Vec<usize>>) -> Result<Self> {
        let mut users = vec![Vec::new(); rows];
        let mut routes = routes;
        for (i, route) in routes.iter_mut().enumerate() {
            route.sort_unstable();
            route.dedup();
            if route.is_empty() {
                return Err(Error::InvalidProblem(format!("charger {i} has an empty route")));
            }
            if let Some(&l) = route.iter().find(|&&l| l >= rows) {
                return Err(Error::InvalidProblem(format!(
                    "charger {i} routes through link {l}, but R has {rows} rows"
                )));
            }
            for &l in route.iter() {
                users[l].push(i);
            }
        }
        Ok(RoutingMatrix { rows, routes, users })
    }

    /// Routing matrix of a radial feeder. In three-phase mode each line is
    /// expanded into links `3l, 3l+1, 3l+2` and chargers use all three.
    pub fn from_feeder(feeder: &Feeder, mode: PhaseMode) -> Self {
        let per = mode.links_per_line();
        let routes = (0..feeder.chargers().len())
            .map(|i| feeder.charger_route(i).into_iter().flat_map(|l| (0..per).map(move |p| per * l + p)).collect())
            .collect();
        Self::from_routes(feeder.lines().len() * per, routes).expect("feeder routes are non-empty and in range")
    }

    /// Builds `R` from a dense 0/1 matrix given row by row.
    pub fn from_dense(dense: &[Vec<u8>]) -> Result<Self> {
        let rows = dense.len();
        let cols = dense.first().map_or(0, Vec::len);
        let routes = (0..cols).map(|i| (0..rows).filter(|&l| dense[l][i] != 0).collect()).collect();
        Self::from_routes(rows, routes)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.routes.len()
    }

    /// Links used by charger `i`, ascending.
    pub fn route(&self, i: usize) -> &[usize] {
        &self.routes[i]
    }

    /// Chargers using link `l`, ascending.
    pub fn users(&self, l: usize) -> &[usize] {
        &self.users[l]
    }

    pub fn get(&self, l: usize, i: usize) -> bool {
        self.routes[i].binary_search(&l).is_ok()
    }

    pub fn nnz(&self) -> usize {
        self.routes.iter().map(Vec::len).sum()
    }

    /// `R x`
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols());
        self.users.iter().map(|u| u.iter().map(|&i| x[i]).sum()).collect()
    }

    /// `R^T y`
    pub fn tmul(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        self.routes.iter().map(|r| r.iter().map(|&l| y[l]).sum()).collect()
    }

    /// Longest route, `max_i sum_l R_li`.
    pub fn max_route_len(&self) -> usize {
        self.routes.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Most-shared link, `max_l sum_i R_li`.
    pub fn max_link_users(&self) -> usize {
        self.users.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Sub-matrix keeping the listed columns, renumbered in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> RoutingMatrix {
        let routes = cols.iter().map(|&i| self.routes[i].clone()).collect();
        Self::from_routes(self.rows, routes).expect("columns of a valid matrix are valid")
    }

    pub fn to_dense(&self) -> Vec<Vec<u8>> {
        let mut dense = vec![vec![0u8; self.cols()]; self.rows];
        for (i, r) in self.routes.iter().enumerate() {
            for &l in r {
                dense[l][i] = 1;
            }
        }
        dense
    }
}
