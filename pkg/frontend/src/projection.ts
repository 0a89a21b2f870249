/** Equirectangular projection of the Norwegian extent onto a viewport.
 *
 * No tile server is involved; regions render as circle overlays on a plain
 * canvas, which keeps the console fully offline.
 */

export interface Viewport {
  width: number;
  height: number;
  padding: number;
}

const NORWAY_EXTENT = {
  minLat: 57.5,
  maxLat: 71.5,
  minLon: 4.0,
  maxLon: 32.0,
};

export function project(
  latitude: number,
  longitude: number,
  viewport: Viewport,
): { x: number; y: number } {
  const { minLat, maxLat, minLon, maxLon } = NORWAY_EXTENT;
  const innerWidth = viewport.width - 2 * viewport.padding;
  const innerHeight = viewport.height - 2 * viewport.padding;
  const x = viewport.padding + ((longitude - minLon) / (maxLon - minLon)) * innerWidth;
  const y = viewport.padding + ((maxLat - latitude) / (maxLat - minLat)) * innerHeight;
  return { x, y };
}
