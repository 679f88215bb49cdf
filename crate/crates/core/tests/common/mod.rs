use hyperfe::macroscale::MacroCase;

/// Linear plane-strain stiffness assembled from scratch: its own Gauss rule,
/// shape-function derivatives and elimination, sharing only the mesh.
pub fn direct_linear_solve(case: &MacroCase, c: [[f64; 3]; 3]) -> Vec<f64> {
    let n = case.n_dofs();
    let mut k = vec![vec![0.0; n]; n];
    let g = 1.0 / 3f64.sqrt();
    for conn in &case.elements {
        let x: Vec<[f64; 2]> = conn.iter().map(|&i| case.nodes[i]).collect();
        for (xi, eta) in [(-g, -g), (g, -g), (g, g), (-g, g)] {
            let dn_dxi = [-(1.0 - eta) / 4.0, (1.0 - eta) / 4.0, (1.0 + eta) / 4.0, -(1.0 + eta) / 4.0];
            let dn_deta = [-(1.0 - xi) / 4.0, -(1.0 + xi) / 4.0, (1.0 + xi) / 4.0, (1.0 - xi) / 4.0];
            let mut jac = [[0.0; 2]; 2];
            for a in 0..4 {
                jac[0][0] += dn_dxi[a] * x[a][0];
                jac[0][1] += dn_dxi[a] * x[a][1];
                jac[1][0] += dn_deta[a] * x[a][0];
                jac[1][1] += dn_deta[a] * x[a][1];
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let mut b = [[0.0; 8]; 3];
            for a in 0..4 {
                let dx = (jac[1][1] * dn_dxi[a] - jac[0][1] * dn_deta[a]) / det;
                let dy = (-jac[1][0] * dn_dxi[a] + jac[0][0] * dn_deta[a]) / det;
                b[0][2 * a] = dx;
                b[1][2 * a + 1] = dy;
                b[2][2 * a] = dy;
                b[2][2 * a + 1] = dx;
            }
            let dofs: Vec<usize> = conn.iter().flat_map(|&i| [2 * i, 2 * i + 1]).collect();
            for p in 0..8 {
                for q in 0..8 {
                    let mut v = 0.0;
                    for r in 0..3 {
                        for s in 0..3 {
                            v += b[r][p] * c[r][s] * b[s][q];
                        }
                    }
                    k[dofs[p]][dofs[q]] += det * v;
                }
            }
        }
    }
    let f = case.external_force();
    let free: Vec<usize> = (0..n).filter(|i| !case.dirichlet.contains(i)).collect();
    let m = free.len();
    let mut a: Vec<Vec<f64>> = free
        .iter()
        .map(|&i| {
            let mut row: Vec<f64> = free.iter().map(|&j| k[i][j]).collect();
            row.push(f[i]);
            row
        })
        .collect();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for row in col + 1..m {
            let factor = a[row][col] / a[col][col];
            for j in col..=m {
                a[row][j] -= factor * a[col][j];
            }
        }
    }
    let mut sol = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|j| a[row][j] * sol[j]).sum();
        sol[row] = (a[row][m] - s) / a[row][row];
    }
    let mut d = vec![0.0; n];
    for (ii, &i) in free.iter().enumerate() {
        d[i] = sol[ii];
    }
    d
}
