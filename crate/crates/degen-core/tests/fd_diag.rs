use degen_core::kalman::CoupledSystem;
use degen_core::mesh::GradedMesh;
use degen_core::moment::*;
use degen_core::solver1d::*;
use degen_core::spectrum::{eigenfunction_eval_mode, DegeneracyExponent};
use degen_core::{CVector, C64};

#[test]
fn diagnose_fd_residual() {
    let alpha = 0.5;
    let t = 0.5;
    let exp = DegeneracyExponent::new(alpha).unwrap();
    let basis = Basis1d::new(exp, 20).unwrap();
    let sys = CoupledSystem::scalar();
    let mut w0 = ModalState1d::new((0..12).map(|k| CVector::from_element(1, C64::new(1.0/(k as f64+1.0), 0.0))).collect());
    let (h, _) = synthesize_control(&basis, &sys, &w0, 12, t, &SynthesisOptions::default()).unwrap();
    w0.coeffs.resize(20, CVector::zeros(1));
    let w_t = modal_forward(&basis, &sys, &w0, Some(&h), t).unwrap();
    eprintln!("modal |c_k(T)| for k=1..20:");
    for (k, c) in w_t.coeffs.iter().enumerate() {
        if c.norm() > 1e-12 {
            eprintln!("  k={}: {:.3e}", k + 1, c.norm());
        }
    }
    let mesh = GradedMesh::new(alpha, 4000).unwrap();
    let w0_mesh = basis.sample(&w0.coeffs, &mesh.centers).unwrap();
    let w_fd = fd_forward_oracle(&exp, &sys, &mesh, &w0_mesh, Some(&h), t, 4000).unwrap();
    let l2r = mesh.l2_norm_vec(&w_fd) / mesh.l2_norm_vec(&w0_mesh);
    eprintln!("FD final L2 ratio: {l2r:.4e}");
    // project FD final state onto modes 1..20
    for k in 0..20 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, &xc) in mesh.centers.iter().enumerate() {
            let phi = eigenfunction_eval_mode(&exp, &basis.modes[k], xc).unwrap();
            acc += w_fd[i][0] * C64::new(phi * mesh.widths[i], 0.0);
        }
        if acc.norm() > 1e-5 {
            eprintln!("  FD mode {}: {:.3e}", k + 1, acc.norm());
        }
    }
    // steps sensitivity
    let w_fd2 = fd_forward_oracle(&exp, &sys, &mesh, &w0_mesh, Some(&h), t, 16000).unwrap();
    eprintln!("FD ratio with 16000 steps: {:.4e}", mesh.l2_norm_vec(&w_fd2) / mesh.l2_norm_vec(&w0_mesh));
    let mesh2 = GradedMesh::new(alpha, 8000).unwrap();
    let w0m2 = basis.sample(&w0.coeffs, &mesh2.centers).unwrap();
    let w_fd3 = fd_forward_oracle(&exp, &sys, &mesh2, &w0m2, Some(&h), t, 8000).unwrap();
    eprintln!("FD ratio with M=8000/8000 steps: {:.4e}", mesh2.l2_norm_vec(&w_fd3) / mesh2.l2_norm_vec(&w0m2));
}
