//! Map context for the detail view, behind a provider interface.

use serde::{Deserialize, Serialize};
use stormsift_core::ingest::{GeoLocation, IngestError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapContext {
    pub address: String,
    pub tile: String,
    pub street_view: Option<String>,
}

pub trait MapProvider: Send + Sync {
    fn context(&self, loc: GeoLocation) -> Result<MapContext, IngestError>;
}

/// Deterministic offline provider: the address is the coordinate pair with
/// its one-degree grid cell, and the tile is a local path per cell.
#[derive(Debug, Clone)]
pub struct MockMapProvider {
    pub tile_dir: String,
}

impl Default for MockMapProvider {
    fn default() -> Self {
        MockMapProvider { tile_dir: "tiles".into() }
    }
}

impl MapProvider for MockMapProvider {
    fn context(&self, loc: GeoLocation) -> Result<MapContext, IngestError> {
        loc.validate()?;
        let (cl, cn) = (loc.lat.floor() as i32, loc.lon.floor() as i32);
        Ok(MapContext {
            address: format!("{:?},{:?} @ cell({cl},{cn})", loc.lat, loc.lon),
            tile: format!("{}/{cl}_{cn}.png", self.tile_dir),
            street_view: None,
        })
    }
}

pub fn map_context(loc: GeoLocation, provider: &dyn MapProvider) -> Result<MapContext, IngestError> {
    provider.context(loc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_rule() {
        let p = MockMapProvider::default();
        let c = map_context(GeoLocation { lat: 26.0, lon: -81.0 }, &p).unwrap();
        assert_eq!(c.address, "26.0,-81.0 @ cell(26,-81)");
        assert_eq!(c.tile, "tiles/26_-81.png");
        assert_eq!(c, map_context(GeoLocation { lat: 26.0, lon: -81.0 }, &p).unwrap());
        let c = map_context(GeoLocation { lat: 25.75, lon: -80.25 }, &p).unwrap();
        assert_eq!(c.address, "25.75,-80.25 @ cell(25,-81)");
        assert!(map_context(GeoLocation { lat: 95.0, lon: 0.0 }, &p).is_err());
    }
}
