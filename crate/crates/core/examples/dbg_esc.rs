use dynlab_core::fractal::*;
use dynlab_core::function::FunctionSpec;
use num_complex::Complex64;

fn main() {
    let f = FunctionSpec::polynomial_real(&[0.0, 0.0, 1.0]);
    let window = GridWindow::new(2.5, 2.5, 3.5, 3.5);
    let (grid, mask) = julia_proxy_grid(&f, &window, 1.0/64.0, 1, 128, &EscapePolicy::default(), 11).unwrap();
    let mut shown = 0;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let i = iy * grid.nx + ix;
            if grid.has_non_escaping[i] && shown < 6 {
                let cx = window.x0 + (ix as f64 + 0.5) * grid.epsilon;
                let cy = window.y0 + (iy as f64 + 0.5) * grid.epsilon;
                let c = escape_classify(&f, Complex64::new(cx, cy), 128, &EscapePolicy::default());
                println!("non-escaping cell ({ix},{iy}) center=({cx},{cy}) class={c:?}");
                shown += 1;
            }
        }
    }
    println!("flagged={} nonesc={}", mask.iter().filter(|&&b| b).count(),
             grid.has_non_escaping.iter().filter(|&&b| b).count());
}
