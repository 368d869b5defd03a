use super::WebError;

/// Largest distance of a vertex from the total-least-squares line of the
/// polyline, divided by its arc length.
pub fn straightness(points: &[[f64; 2]]) -> Result<f64, WebError> {
    let degenerate = WebError::DegenerateCurve {
        vertices: points.len(),
    };
    if points.len() < 3 {
        return Err(degenerate);
    }
    let length: f64 = points
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .sum();
    if !(length > 0.0) {
        return Err(degenerate);
    }
    let k = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / k;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / k;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    // Direction of the largest principal axis.
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (nx, ny) = (-theta.sin(), theta.cos());
    let worst = points
        .iter()
        .map(|p| ((p[0] - cx) * nx + (p[1] - cy) * ny).abs())
        .fold(0.0, f64::max);
    Ok(worst / length)
}
