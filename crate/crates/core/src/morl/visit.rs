use serde::{Deserialize, Serialize};

/// Binary state x action visit matrix of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitTable {
    n_actions: usize,
    cells: Vec<bool>,
}

impl VisitTable {
    pub fn new(n_actions: usize) -> Self {
        Self { n_actions, cells: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.cells.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Appends zero rows until there are `rows` of them.
    pub fn grow_to(&mut self, rows: usize) {
        if rows > self.rows() {
            self.cells.resize(rows * self.n_actions, false);
        }
    }

    pub fn visited(&self, row: usize, action: usize) -> bool {
        self.cells[row * self.n_actions + action]
    }

    pub fn mark(&mut self, row: usize, action: usize) {
        self.cells[row * self.n_actions + action] = true;
    }

    pub fn unvisited(&self, row: usize) -> Vec<usize> {
        (0..self.n_actions).filter(|&a| !self.visited(row, a)).collect()
    }

    pub fn row_complete(&self, row: usize) -> bool {
        (0..self.n_actions).all(|a| self.visited(row, a))
    }
}
