//! Index arithmetic for dense x-fastest 3D grids.

pub type Dims = [usize; 3];
pub type Coord = [usize; 3];

/// Face-neighbor offsets in a fixed order: -x, +x, -y, +y, -z, +z.
pub const NEIGHBORS6: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

#[inline(always)]
pub fn voxel_count(dims: Dims) -> usize {
    dims[0] * dims[1] * dims[2]
}

#[inline(always)]
pub fn index(dims: Dims, c: Coord) -> usize {
    c[0] + dims[0] * (c[1] + dims[1] * c[2])
}

#[inline(always)]
pub fn coords(dims: Dims, idx: usize) -> Coord {
    let x = idx % dims[0];
    let r = idx / dims[0];
    [x, r % dims[1], r / dims[1]]
}

/// Coordinate shifted by `off`, or `None` when it leaves the grid.
#[inline(always)]
pub fn offset(dims: Dims, c: Coord, off: [i64; 3]) -> Option<Coord> {
    let mut out = [0usize; 3];
    for a in 0..3 {
        let v = c[a] as i64 + off[a];
        if v < 0 || v >= dims[a] as i64 {
            return None;
        }
        out[a] = v as usize;
    }
    Some(out)
}

/// Linear index of the `dir`-th face neighbor, `None` when out of grid.
#[inline(always)]
pub fn neighbor(dims: Dims, c: Coord, dir: usize) -> Option<usize> {
    offset(dims, c, NEIGHBORS6[dir]).map(|n| index(dims, n))
}

/// Inclusive axis-aligned box of voxel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Region {
    pub lo: Coord,
    pub hi: Coord,
}

impl Region {
    pub fn full(dims: Dims) -> Self {
        Self {
            lo: [0; 3],
            hi: [dims[0] - 1, dims[1] - 1, dims[2] - 1],
        }
    }

    pub fn point(c: Coord) -> Self {
        Self { lo: c, hi: c }
    }

    pub fn include(&mut self, c: Coord) {
        for a in 0..3 {
            self.lo[a] = self.lo[a].min(c[a]);
            self.hi[a] = self.hi[a].max(c[a]);
        }
    }

    /// Grows the box by `r` voxels on every side, clipped to the grid.
    pub fn expand(&self, r: usize, dims: Dims) -> Self {
        let mut out = *self;
        for a in 0..3 {
            out.lo[a] = self.lo[a].saturating_sub(r);
            out.hi[a] = (self.hi[a] + r).min(dims[a] - 1);
        }
        out
    }

    pub fn extent(&self) -> Dims {
        [
            self.hi[0] - self.lo[0] + 1,
            self.hi[1] - self.lo[1] + 1,
            self.hi[2] - self.lo[2] + 1,
        ]
    }

    pub fn contains(&self, c: Coord) -> bool {
        (0..3).all(|a| c[a] >= self.lo[a] && c[a] <= self.hi[a])
    }

    /// Iterates coordinates in x-fastest order.
    pub fn iter(&self) -> impl Iterator<Item = Coord> + '_ {
        let (lo, hi) = (self.lo, self.hi);
        (lo[2]..=hi[2]).flat_map(move |z| {
            (lo[1]..=hi[1]).flat_map(move |y| (lo[0]..=hi[0]).map(move |x| [x, y, z]))
        })
    }
}

/// Bounding box of all indices where `pred` holds, `None` if there are none.
pub fn bounding_region<T>(dims: Dims, data: &[T], pred: impl Fn(&T) -> bool) -> Option<Region> {
    let mut region: Option<Region> = None;
    for (i, v) in data.iter().enumerate() {
        if pred(v) {
            let c = coords(dims, i);
            match region.as_mut() {
                Some(r) => r.include(c),
                None => region = Some(Region::point(c)),
            }
        }
    }
    region
}
