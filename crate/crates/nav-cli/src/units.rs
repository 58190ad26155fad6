//! Unit-suffixed numeric arguments: `0.4m`, `40cm`, `25deg`, `0.5rad`.
//! Bare numbers mean the base unit (meters / degrees).

pub fn parse_length(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, scale) = if let Some(n) = s.strip_suffix("mm") {
        (n, 0.001)
    } else if let Some(n) = s.strip_suffix("cm") {
        (n, 0.01)
    } else if let Some(n) = s.strip_suffix('m') {
        (n, 1.0)
    } else {
        (s, 1.0)
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a length (try 0.4m, 40cm, 400mm)"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v * scale)
}

/// Angles normalize to degrees, the convention used everywhere else.
pub fn parse_angle_deg(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, scale) = if let Some(n) = s.strip_suffix("deg") {
        (n, 1.0)
    } else if let Some(n) = s.strip_suffix("rad") {
        (n, 180.0 / std::f64::consts::PI)
    } else {
        (s, 1.0)
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not an angle (try 25deg or 0.44rad)"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v * scale)
}

/// `x,y` with optional per-component length suffixes.
pub fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("`{s}` is not a point (expected x,y)"));
    }
    Ok((parse_length(parts[0])?, parse_length(parts[1])?))
}

/// `x0,y0,x1,y1`.
pub fn parse_rect(s: &str) -> Result<[f64; 4], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(format!("`{s}` is not a rect (expected x0,y0,x1,y1)"));
    }
    let mut out = [0.0; 4];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = parse_length(p)?;
    }
    Ok(out)
}

/// `x,y,theta` where theta takes angle suffixes.
pub fn parse_pose(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("`{s}` is not a pose (expected x,y,theta)"));
    }
    Ok((
        parse_length(parts[0])?,
        parse_length(parts[1])?,
        parse_angle_deg(parts[2])?,
    ))
}
