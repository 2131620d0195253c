//! HPL.dat generation.

use super::AdapterError;

/// Parameters for a single-problem HPL input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HplParams {
    /// Problem size.
    pub n: u64,
    /// Block size.
    pub nb: u64,
    pub p: u64,
    pub q: u64,
}

impl HplParams {
    pub fn grid_size(&self) -> u64 {
        self.p * self.q
    }

    /// Checks that the process grid covers exactly `ranks` MPI ranks.
    pub fn check_ranks(&self, ranks: u64) -> Result<(), AdapterError> {
        if self.grid_size() != ranks {
            return Err(AdapterError::InvalidGrid(format!(
                "P x Q = {} but the run has {ranks} ranks",
                self.grid_size()
            )));
        }
        Ok(())
    }
}

/// Most square `P x Q` factorization of `ranks` with `P <= Q`.
pub fn square_grid(ranks: u64) -> (u64, u64) {
    let ranks = ranks.max(1);
    let mut p = (ranks as f64).sqrt() as u64;
    while p > 1 && !ranks.is_multiple_of(p) {
        p -= 1;
    }
    let p = p.max(1);
    (p, ranks / p)
}

/// Renders an HPL.dat with one problem size, one block size and one grid.
/// The remaining tuning fields use the stock HPL defaults.
pub fn hpl_generate_input(params: &HplParams) -> Result<String, AdapterError> {
    if params.grid_size() == 0 {
        return Err(AdapterError::InvalidGrid(format!("P x Q = {}x{}", params.p, params.q)));
    }
    if params.n == 0 {
        return Err(AdapterError::InvalidParameter("N".into()));
    }
    if params.nb == 0 {
        return Err(AdapterError::InvalidParameter("NB".into()));
    }

    let rows: [(String, &str); 31] = [
        ("HPLinpack benchmark input file".into(), ""),
        ("Innovative Computing Laboratory, University of Tennessee".into(), ""),
        ("HPL.out".into(), "output file name (if any)"),
        ("6".into(), "device out (6=stdout,7=stderr,file)"),
        ("1".into(), "# of problems sizes (N)"),
        (params.n.to_string(), "Ns"),
        ("1".into(), "# of NBs"),
        (params.nb.to_string(), "NBs"),
        ("0".into(), "PMAP process mapping (0=Row-,1=Column-major)"),
        ("1".into(), "# of process grids (P x Q)"),
        (params.p.to_string(), "Ps"),
        (params.q.to_string(), "Qs"),
        ("16.0".into(), "threshold"),
        ("1".into(), "# of panel fact"),
        ("2".into(), "PFACTs (0=left, 1=Crout, 2=Right)"),
        ("1".into(), "# of recursive stopping criterium"),
        ("4".into(), "NBMINs (>= 1)"),
        ("1".into(), "# of panels in recursion"),
        ("2".into(), "NDIVs"),
        ("1".into(), "# of recursive panel fact."),
        ("1".into(), "RFACTs (0=left, 1=Crout, 2=Right)"),
        ("1".into(), "# of broadcast"),
        ("1".into(), "BCASTs (0=1rg,1=1rM,2=2rg,3=2rM,4=Lng,5=LnM)"),
        ("1".into(), "# of lookahead depth"),
        ("1".into(), "DEPTHs (>=0)"),
        ("2".into(), "SWAP (0=bin-exch,1=long,2=mix)"),
        ("64".into(), "swapping threshold"),
        ("0".into(), "L1 in (0=transposed,1=no-transposed) form"),
        ("0".into(), "U  in (0=transposed,1=no-transposed) form"),
        ("1".into(), "Equilibration (0=no,1=yes)"),
        ("8".into(), "memory alignment in double (> 0)"),
    ];

    let mut out = String::new();
    for (value, label) in rows {
        if label.is_empty() {
            out.push_str(&value);
        } else {
            out.push_str(&format!("{value:<13}{label}"));
        }
        out.push('\n');
    }
    Ok(out)
}
