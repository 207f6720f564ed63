//! Rectangular plate, polyline crack, decomposition along the crack spine and
//! boundary collocation.
//!
//! The spine runs boundary to boundary: the crack polyline plus straight
//! extensions from each active tip along its tangent. Subdomain 0 lies to the
//! left of the spine's traversal direction (above it for a crack running in
//! `+x`), subdomain 1 to the right. Every boundary polyline is stored in the
//! counterclockwise orientation of its owner, so the outward normal of a piece
//! with direction `(dx, dy)` is `(dy, -dx)`. Interface polylines follow
//! subdomain 0's orientation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cx, expi, Scalar, C};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec<T> {
    pub half_width: T,
    pub half_height: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Bottom,
    Right,
    Top,
    Left,
}

impl<T: Scalar> DomainSpec<T> {
    pub fn new(half_width: T, half_height: T) -> Result<Self> {
        if !(half_width > T::zero() && half_height > T::zero()) {
            return Err(Error::Geometry(format!(
                "half_width and half_height must be positive, got {half_width} and {half_height}"
            )));
        }
        Ok(Self {
            half_width,
            half_height,
        })
    }

    pub fn perimeter(&self) -> T {
        T::lit(4.0) * (self.half_width + self.half_height)
    }

    fn tol(&self) -> T {
        T::lit(1e-9) * self.half_width.max(self.half_height)
    }

    /// Corners counterclockwise from the bottom-left one.
    pub fn corners(&self) -> [C<T>; 4] {
        let (b, h) = (self.half_width, self.half_height);
        [cx(-b, -h), cx(b, -h), cx(b, h), cx(-b, h)]
    }

    pub fn contains(&self, z: C<T>) -> bool {
        z.re.abs() < self.half_width && z.im.abs() < self.half_height
    }

    /// Distance from an interior point to the outer boundary.
    pub fn distance_to_boundary(&self, z: C<T>) -> T {
        (self.half_width - z.re.abs()).min(self.half_height - z.im.abs())
    }

    /// Edge a boundary point lies on, if any.
    pub fn edge_of(&self, z: C<T>) -> Option<Edge> {
        let (b, h, t) = (self.half_width, self.half_height, self.tol());
        if (z.im + h).abs() <= t && z.re.abs() <= b + t {
            Some(Edge::Bottom)
        } else if (z.re - b).abs() <= t && z.im.abs() <= h + t {
            Some(Edge::Right)
        } else if (z.im - h).abs() <= t && z.re.abs() <= b + t {
            Some(Edge::Top)
        } else if (z.re + b).abs() <= t && z.im.abs() <= h + t {
            Some(Edge::Left)
        } else {
            None
        }
    }

    /// Counterclockwise arclength coordinate of a boundary point, starting at
    /// the bottom-left corner.
    fn perimeter_coord(&self, z: C<T>) -> Result<T> {
        let (b, h) = (self.half_width, self.half_height);
        let two = T::lit(2.0);
        match self.edge_of(z) {
            Some(Edge::Bottom) => Ok(z.re + b),
            Some(Edge::Right) => Ok(two * b + z.im + h),
            Some(Edge::Top) => Ok(two * b + two * h + (b - z.re)),
            Some(Edge::Left) => Ok(T::lit(4.0) * b + two * h + (h - z.im)),
            None => Err(Error::Geometry(format!("point ({}, {}) is not on the boundary", z.re, z.im))),
        }
    }

    /// Corners passed when walking counterclockwise from `from` to `to`.
    fn corners_between(&self, from: C<T>, to: C<T>) -> Result<Vec<C<T>>> {
        let (b, h) = (self.half_width, self.half_height);
        let two = T::lit(2.0);
        let p = self.perimeter();
        let s0 = self.perimeter_coord(from)?;
        let mut s1 = self.perimeter_coord(to)?;
        if s1 <= s0 {
            s1 = s1 + p;
        }
        let cs = [T::zero(), two * b, two * b + two * h, T::lit(4.0) * b + two * h];
        let corners = self.corners();
        let mut out = Vec::new();
        for lap in 0..2 {
            for (k, &c) in cs.iter().enumerate() {
                let s = c + if lap == 1 { p } else { T::zero() };
                if s > s0 && s < s1 {
                    out.push(corners[k]);
                }
            }
        }
        Ok(out)
    }

    /// First boundary hit of the ray `p + t d`, `t > 0`, from an interior point.
    pub fn ray_exit(&self, p: C<T>, angle: T) -> Result<C<T>> {
        let d = expi(angle);
        let (b, h) = (self.half_width, self.half_height);
        let wall_x = if d.re > T::zero() { b } else { -b };
        let wall_y = if d.im > T::zero() { h } else { -h };
        let tx = if d.re.abs() > T::epsilon() { (wall_x - p.re) / d.re } else { T::infinity() };
        let ty = if d.im.abs() > T::epsilon() { (wall_y - p.im) / d.im } else { T::infinity() };
        // place the hit exactly on its wall
        let q = if tx <= ty {
            cx(wall_x, (p.im + d.im * tx).max(-h).min(h))
        } else {
            cx((p.re + d.re * ty).max(-b).min(b), wall_y)
        };
        let corner_tol = T::lit(1e-6) * b.max(h);
        if self.corners().iter().any(|&c| (c - q).norm() < corner_tol) {
            return Err(Error::Geometry(format!(
                "tangent extension from ({}, {}) exits through a corner; perturb the geometry",
                p.re, p.im
            )));
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrackKind {
    /// Interior crack; both ends are active tips.
    Center,
    /// First vertex is the mouth on the outer boundary; the last is the tip.
    Edge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct CrackGeometry<T> {
    pub vertices: Vec<C<T>>,
    pub kind: CrackKind,
}

/// Active crack tip with its outward tangent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tip<T> {
    pub position: C<T>,
    pub angle: T,
}

fn arg<T: Scalar>(z: C<T>) -> T {
    z.im.atan2(z.re)
}

/// Proper intersection of segments `ab` and `cd` (shared endpoints excluded).
fn segments_cross<T: Scalar>(a: C<T>, b: C<T>, c: C<T>, d: C<T>) -> bool {
    let cross = |u: C<T>, v: C<T>| u.re * v.im - u.im * v.re;
    let d1 = cross(b - a, c - a);
    let d2 = cross(b - a, d - a);
    let d3 = cross(d - c, a - c);
    let d4 = cross(d - c, b - c);
    let z = T::zero();
    ((d1 > z && d2 < z) || (d1 < z && d2 > z)) && ((d3 > z && d4 < z) || (d3 < z && d4 > z))
}

fn polyline_length<T: Scalar>(v: &[C<T>]) -> T {
    v.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

impl<T: Scalar> CrackGeometry<T> {
    pub fn straight_center(center: C<T>, half_length: T, angle: T) -> Self {
        let d = expi(angle) * half_length;
        Self {
            vertices: vec![center - d, center + d],
            kind: CrackKind::Center,
        }
    }

    pub fn straight_edge(mouth: C<T>, length: T, angle: T) -> Self {
        Self {
            vertices: vec![mouth, mouth + expi(angle) * length],
            kind: CrackKind::Edge,
        }
    }

    pub fn length(&self) -> T {
        polyline_length(&self.vertices)
    }

    /// Active tips: for center cracks the first vertex then the last.
    pub fn tips(&self) -> Vec<Tip<T>> {
        let v = &self.vertices;
        let n = v.len();
        let last = Tip {
            position: v[n - 1],
            angle: arg(v[n - 1] - v[n - 2]),
        };
        match self.kind {
            CrackKind::Edge => vec![last],
            CrackKind::Center => vec![
                Tip {
                    position: v[0],
                    angle: arg(v[0] - v[1]),
                },
                last,
            ],
        }
    }

    /// Tip exclusion radius used for evaluation and sampling.
    pub fn exclusion_radius(&self) -> T {
        T::lit(1e-3) * self.length()
    }

    pub fn validate(&self, dom: &DomainSpec<T>) -> Result<()> {
        let v = &self.vertices;
        if v.len() < 2 {
            return Err(Error::Geometry("crack needs at least two vertices".into()));
        }
        if v.windows(2).any(|w| (w[1] - w[0]).norm() <= dom.tol()) {
            return Err(Error::Geometry("consecutive crack vertices coincide".into()));
        }
        for i in 0..v.len() - 1 {
            for j in i + 2..v.len() - 1 {
                if segments_cross(v[i], v[i + 1], v[j], v[j + 1]) {
                    return Err(Error::Geometry("crack polyline intersects itself".into()));
                }
            }
        }
        let interior = match self.kind {
            CrackKind::Center => &v[..],
            CrackKind::Edge => {
                if dom.edge_of(v[0]).is_none() {
                    return Err(Error::Geometry("edge crack mouth must lie on the outer boundary".into()));
                }
                &v[1..]
            }
        };
        if let Some(p) = interior.iter().find(|&&p| !dom.contains(p)) {
            return Err(Error::Geometry(format!("crack vertex ({}, {}) is not inside the plate", p.re, p.im)));
        }
        Ok(())
    }

    /// Grow tip `tip_index` (as ordered by [`tips`](Self::tips)) by `da` at
    /// kink angle `theta` from its current tangent, counterclockwise positive.
    pub fn extend(&self, dom: &DomainSpec<T>, tip_index: usize, theta: T, da: T) -> Result<Self> {
        if !(da > T::zero()) {
            return Err(Error::InvalidInput(format!("crack increment must be positive, got {da}")));
        }
        let tips = self.tips();
        let tip = *tips
            .get(tip_index)
            .ok_or_else(|| Error::InvalidInput(format!("no crack tip with index {tip_index}")))?;
        let new = tip.position + expi(tip.angle + theta) * da;
        if !dom.contains(new) {
            return Err(Error::Geometry(format!(
                "extended tip ({}, {}) leaves the plate",
                new.re, new.im
            )));
        }
        let mut out = self.clone();
        let front = self.kind == CrackKind::Center && tip_index == 0;
        if front {
            out.vertices.insert(0, new);
        } else {
            out.vertices.push(new);
        }
        let v = &out.vertices;
        let (a, b) = if front { (v[0], v[1]) } else { (v[v.len() - 2], v[v.len() - 1]) };
        let skip = if front { 0..2 } else { v.len() - 3..v.len() - 1 };
        for i in 0..v.len() - 1 {
            if skip.contains(&i) {
                continue;
            }
            if segments_cross(a, b, v[i], v[i + 1]) {
                return Err(Error::Geometry("crack increment crosses the existing crack".into()));
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`CrackGeometry::extend`] for the last tip.
pub fn extend_crack<T: Scalar>(crack: &CrackGeometry<T>, dom: &DomainSpec<T>, theta: T, da: T) -> Result<CrackGeometry<T>> {
    let last = crack.tips().len() - 1;
    crack.extend(dom, last, theta, da)
}

/// Tip seen from the decomposition, with the local branch-cut direction each
/// subdomain uses for its enrichment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipInfo<T> {
    pub position: C<T>,
    pub angle: T,
    pub cuts: [T; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Outer(Edge),
    CrackFace,
    Interface,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub kind: SegmentKind,
    /// Owning subdomain; for interfaces the subdomain whose outward normal is
    /// stored (the other one sees the opposite normal).
    pub owner: usize,
    pub polyline: Vec<C<T>>,
}

impl<T: Scalar> Segment<T> {
    pub fn length(&self) -> T {
        polyline_length(&self.polyline)
    }

    pub fn owners(&self) -> Vec<usize> {
        match self.kind {
            SegmentKind::Interface => vec![0, 1],
            _ => vec![self.owner],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T> {
    pub domain: DomainSpec<T>,
    pub crack: CrackGeometry<T>,
    /// Boundary-to-boundary polyline.
    pub spine: Vec<C<T>>,
    /// Counterclockwise polygons of the two subdomains.
    pub polygons: [Vec<C<T>>; 2],
    pub segments: Vec<Segment<T>>,
    pub tips: Vec<TipInfo<T>>,
}

fn point_in_polygon<T: Scalar>(poly: &[C<T>], z: C<T>) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.im > z.im) != (b.im > z.im) {
            let x = (b.re - a.re) * (z.im - a.im) / (b.im - a.im) + a.re;
            if z.re < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Whether the ray from `p` at `angle` hits the spine anywhere but at `p`.
fn ray_hits_spine<T: Scalar>(dom: &DomainSpec<T>, spine: &[C<T>], p: C<T>, angle: T) -> bool {
    let far = p + expi(angle) * (T::lit(4.0) * dom.half_width.max(dom.half_height));
    let tol = dom.tol() * T::lit(10.0);
    spine.windows(2).any(|w| {
        if (w[0] - p).norm() <= tol || (w[1] - p).norm() <= tol {
            return false;
        }
        segments_cross(p, far, w[0], w[1])
    })
}

impl<T: Scalar> Decomposition<T> {
    pub fn side_of(&self, z: C<T>) -> usize {
        if point_in_polygon(&self.polygons[0], z) {
            0
        } else {
            1
        }
    }

    pub fn interface(&self) -> Vec<&Segment<T>> {
        self.segments.iter().filter(|s| s.kind == SegmentKind::Interface).collect()
    }
}

/// Split the plate along the crack spine.
pub fn decompose<T: Scalar>(dom: &DomainSpec<T>, crack: &CrackGeometry<T>) -> Result<Decomposition<T>> {
    crack.validate(dom)?;
    let tips = crack.tips();
    let v = &crack.vertices;
    let mut spine = Vec::with_capacity(v.len() + 2);
    let mut leading_ext = false;
    if crack.kind == CrackKind::Center {
        spine.push(dom.ray_exit(tips[0].position, tips[0].angle)?);
        leading_ext = true;
    }
    spine.extend_from_slice(v);
    let last = tips[tips.len() - 1];
    spine.push(dom.ray_exit(last.position, last.angle)?);

    for i in 0..spine.len() - 1 {
        for j in i + 2..spine.len() - 1 {
            if segments_cross(spine[i], spine[i + 1], spine[j], spine[j + 1]) {
                return Err(Error::Geometry("crack spine intersects itself".into()));
            }
        }
    }

    let s0 = spine[0];
    let sn = spine[spine.len() - 1];
    let mut poly0 = spine.clone();
    poly0.extend(dom.corners_between(sn, s0)?);
    let mut poly1: Vec<C<T>> = spine.iter().rev().copied().collect();
    poly1.extend(dom.corners_between(s0, sn)?);

    let mut segments = Vec::new();
    for (owner, (from, to)) in [(sn, s0), (s0, sn)].into_iter().enumerate() {
        let mut path = vec![from];
        path.extend(dom.corners_between(from, to)?);
        path.push(to);
        for w in path.windows(2) {
            if (w[1] - w[0]).norm() <= dom.tol() {
                continue;
            }
            let edge = dom
                .edge_of((w[0] + w[1]) * T::lit(0.5))
                .ok_or_else(|| Error::Geometry("boundary walk left the rectangle".into()))?;
            segments.push(Segment {
                kind: SegmentKind::Outer(edge),
                owner,
                polyline: w.to_vec(),
            });
        }
    }

    let crack_start = usize::from(leading_ext);
    let crack_part = spine[crack_start..crack_start + v.len()].to_vec();
    segments.push(Segment {
        kind: SegmentKind::CrackFace,
        owner: 0,
        polyline: crack_part.clone(),
    });
    segments.push(Segment {
        kind: SegmentKind::CrackFace,
        owner: 1,
        polyline: crack_part.into_iter().rev().collect(),
    });
    if leading_ext {
        segments.push(Segment {
            kind: SegmentKind::Interface,
            owner: 0,
            polyline: vec![spine[0], spine[1]],
        });
    }
    let n = spine.len();
    segments.push(Segment {
        kind: SegmentKind::Interface,
        owner: 0,
        polyline: vec![spine[n - 2], spine[n - 1]],
    });

    // Branch cuts: each subdomain cuts into the other one. Subdomain 0 lies
    // to the left of the spine, so at a tip whose tangent follows the spine
    // it cuts to the right (local -pi/2), and the reverse at a tip facing
    // against the traversal direction.
    let half_pi = T::FRAC_PI_2();
    let mut tip_infos = Vec::with_capacity(tips.len());
    for (k, tip) in tips.iter().enumerate() {
        let along = !(crack.kind == CrackKind::Center && k == 0);
        let base0 = if along { -half_pi } else { half_pi };
        let mut cuts = [base0, -base0];
        for cut in cuts.iter_mut() {
            *cut = choose_cut(dom, &spine, tip, *cut)?;
        }
        tip_infos.push(TipInfo {
            position: tip.position,
            angle: tip.angle,
            cuts,
        });
    }

    Ok(Decomposition {
        domain: *dom,
        crack: crack.clone(),
        spine,
        polygons: [poly0, poly1],
        segments,
        tips: tip_infos,
    })
}

/// Nearest direction to `preferred` (same half-plane) whose ray stays off
/// the spine.
fn choose_cut<T: Scalar>(dom: &DomainSpec<T>, spine: &[C<T>], tip: &Tip<T>, preferred: T) -> Result<T> {
    let step = T::lit(2.5_f64.to_radians());
    let sign = preferred.signum();
    for k in 0..36 {
        let off = step * T::lit(((k + 1) / 2) as f64) * if k % 2 == 0 { T::one() } else { -T::one() };
        let local = preferred + off;
        if local.abs() >= T::PI() - step || local * sign <= step {
            continue;
        }
        if !ray_hits_spine(dom, spine, tip.position, tip.angle + local) {
            return Ok(local);
        }
    }
    Err(Error::Geometry(format!(
        "no branch cut from tip ({}, {}) avoids the crack spine",
        tip.position.re, tip.position.im
    )))
}

/// Prescribed condition on one outer edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCondition<T> {
    Traction([T; 2]),
    Displacement([T; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeLoads<T> {
    pub bottom: EdgeCondition<T>,
    pub right: EdgeCondition<T>,
    pub top: EdgeCondition<T>,
    pub left: EdgeCondition<T>,
}

impl<T: Scalar> EdgeLoads<T> {
    pub fn traction_free() -> Self {
        let z = EdgeCondition::Traction([T::zero(); 2]);
        Self {
            bottom: z,
            right: z,
            top: z,
            left: z,
        }
    }

    /// Tension `sigma` along `y` on the top and bottom edges.
    pub fn uniaxial_tension(sigma: T) -> Self {
        Self {
            top: EdgeCondition::Traction([T::zero(), sigma]),
            bottom: EdgeCondition::Traction([T::zero(), -sigma]),
            ..Self::traction_free()
        }
    }

    /// Self-equilibrated pure shear `tau` on all four edges.
    pub fn pure_shear(tau: T) -> Self {
        Self {
            top: EdgeCondition::Traction([tau, T::zero()]),
            bottom: EdgeCondition::Traction([-tau, T::zero()]),
            right: EdgeCondition::Traction([T::zero(), tau]),
            left: EdgeCondition::Traction([T::zero(), -tau]),
        }
    }

    pub fn on(&self, edge: Edge) -> EdgeCondition<T> {
        match edge {
            Edge::Bottom => self.bottom,
            Edge::Right => self.right,
            Edge::Top => self.top,
            Edge::Left => self.left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Dirichlet,
    Neumann,
    Interface,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollocationPoint<T> {
    pub z: C<T>,
    /// Unit outward normal of `owners[0]`.
    pub normal: C<T>,
    pub kind: ConditionKind,
    /// Prescribed displacement or traction; zero for interface points.
    pub target: [T; 2],
    pub segment: usize,
    /// Owning subdomains; both entries are used only for interface points.
    pub owners: [usize; 2],
    /// True for points on the outer rectangle.
    pub outer: bool,
}

impl<T: Scalar> CollocationPoint<T> {
    pub fn owner_ids(&self) -> &[usize] {
        match self.kind {
            ConditionKind::Interface => &self.owners,
            _ => &self.owners[..1],
        }
    }

    /// Outward normal as seen from subdomain `id`.
    pub fn normal_for(&self, id: usize) -> C<T> {
        if id == self.owners[0] {
            self.normal
        } else {
            -self.normal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentInfo<T> {
    pub kind: SegmentKind,
    pub condition: ConditionKind,
    pub length: T,
    /// `length / total length`; the weights sum to one.
    pub weight: T,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet<T> {
    pub points: Vec<CollocationPoint<T>>,
    pub segments: Vec<SegmentInfo<T>>,
}

impl<T: Scalar> CollocationSet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Split `n` over `lengths` by largest remainder.
fn allocate<T: Scalar>(n: usize, lengths: &[T]) -> Result<Vec<usize>> {
    let total: T = lengths.iter().copied().sum();
    let nf = T::from_usize(n).unwrap();
    let exact: Vec<T> = lengths.iter().map(|&l| nf * l / total).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor().to_usize().unwrap_or(0)).collect();
    let mut rest = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    if n < 2 * lengths.len() {
        let segment = counts.iter().position(|&c| c < 2).unwrap_or(0);
        return Err(Error::TooFewPoints { segment, got: counts[segment] });
    }
    // top up short segments from the best-stocked ones
    while let Some(i) = counts.iter().position(|&c| c < 2) {
        let j = (0..counts.len()).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
        counts[j] -= 1;
        counts[i] += 1;
    }
    Ok(counts)
}

fn sample_set<T: Scalar>(
    dec: &Decomposition<T>,
    loads: &EdgeLoads<T>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CollocationSet<T>> {
    let lengths: Vec<T> = dec.segments.iter().map(|s| s.length()).collect();
    let counts = allocate(n, &lengths)?;
    let total: T = lengths.iter().copied().sum();
    let tips: Vec<C<T>> = dec.tips.iter().map(|t| t.position).collect();
    let eps = dec.crack.exclusion_radius();

    let mut points = Vec::with_capacity(n);
    let mut infos = Vec::with_capacity(dec.segments.len());
    let mut wsum = T::zero();
    for (sid, (seg, &count)) in dec.segments.iter().zip(&counts).enumerate() {
        let (condition, target) = match seg.kind {
            SegmentKind::Outer(edge) => match loads.on(edge) {
                EdgeCondition::Traction(t) => (ConditionKind::Neumann, t),
                EdgeCondition::Displacement(u) => (ConditionKind::Dirichlet, u),
            },
            SegmentKind::CrackFace => (ConditionKind::Neumann, [T::zero(); 2]),
            SegmentKind::Interface => (ConditionKind::Interface, [T::zero(); 2]),
        };
        let owners = match seg.kind {
            SegmentKind::Interface => [0, 1],
            _ => [seg.owner, seg.owner],
        };
        let len = lengths[sid];
        let weight = if sid + 1 == dec.segments.len() { T::one() - wsum } else { len / total };
        wsum = wsum + weight;
        infos.push(SegmentInfo {
            kind: seg.kind,
            condition,
            length: len,
            weight,
            count,
        });

        let cum: Vec<T> = std::iter::once(T::zero())
            .chain(seg.polyline.windows(2).scan(T::zero(), |acc, w| {
                *acc = *acc + (w[1] - w[0]).norm();
                Some(*acc)
            }))
            .collect();
        let cf = T::from_usize(count).unwrap();
        for k in 0..count {
            let mut placed = None;
            for _ in 0..64 {
                let u = T::lit(rng.random::<f64>());
                let s = (T::from_usize(k).unwrap() + u) / cf * len;
                let piece = cum.windows(2).position(|c| s <= c[1]).unwrap_or(cum.len() - 2);
                let (a, b) = (seg.polyline[piece], seg.polyline[piece + 1]);
                let pl = cum[piece + 1] - cum[piece];
                let z = a + (b - a) * ((s - cum[piece]) / pl);
                if tips.iter().all(|&t| (z - t).norm() >= eps) {
                    let d = (b - a) / pl;
                    placed = Some((z, cx(d.im, -d.re)));
                    break;
                }
            }
            let (z, normal) = placed.ok_or_else(|| {
                Error::Geometry(format!("could not place a point on segment {sid} outside the tip exclusion disks"))
            })?;
            points.push(CollocationPoint {
                z,
                normal,
                kind: condition,
                target,
                segment: sid,
                owners,
                outer: matches!(seg.kind, SegmentKind::Outer(_)),
            });
        }
    }
    Ok(CollocationSet { points, segments: infos })
}

/// Stratified training and test sets; deterministic in `seed`, with the
/// test set drawn from an independent stream. `n_test = 0` gives an empty
/// test set.
pub fn sample_boundaries<T: Scalar>(
    dec: &Decomposition<T>,
    loads: &EdgeLoads<T>,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(CollocationSet<T>, CollocationSet<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = sample_set(dec, loads, n_train, &mut rng)?;
    let test = if n_test == 0 {
        CollocationSet {
            points: Vec::new(),
            segments: Vec::new(),
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        sample_set(dec, loads, n_test, &mut rng)?
    };
    Ok((train, test))
}
