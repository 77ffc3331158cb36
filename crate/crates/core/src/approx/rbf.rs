/// One Gaussian radial basis function on the module plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfTerm {
    pub amplitude: f64,
    pub width: f64,
    pub center_x: f64,
    pub center_y: f64,
}

impl RbfTerm {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.center_x;
        let dy = y - self.center_y;
        self.amplitude * (-(dx * dx + dy * dy) / (self.width * self.width)).exp()
    }
}

pub fn rbf_eval(terms: &[RbfTerm], x: f64, y: f64) -> f64 {
    terms.iter().map(|t| t.eval(x, y)).sum()
}
