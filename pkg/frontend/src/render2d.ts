// Wireframe rendering on a 2D canvas: same camera model as the desktop
// renderer (pinhole at +z looking back at the origin, virtual surface
// one unit in front), so both ends draw the same picture for the same
// landmarks.

export interface ViewConfig {
  width: number;
  height: number;
  pixelsPerUnit: number;
  cameraZ: number; // pinhole position on the +z axis
  surfaceZ: number; // virtual surface offset (negative: in front)
}

export const DEFAULT_VIEW: ViewConfig = {
  width: 512,
  height: 512,
  pixelsPerUnit: 900,
  cameraZ: 3,
  surfaceZ: -1,
};

// Project every landmark to pixel coordinates; null where the vertex
// cannot be drawn (non-finite input or degenerate depth). With the
// camera axis-aligned the full matrix collapses to a z-divide.
export function projectPoints(coords: Float64Array, view: ViewConfig = DEFAULT_VIEW): Array<[number, number] | null> {
  const cx = view.width / 2;
  const cy = view.height / 2;
  const out: Array<[number, number] | null> = [];
  for (let i = 0; i < coords.length; i += 3) {
    const x = coords[i];
    const y = coords[i + 1];
    const z = coords[i + 2];
    if (!(Number.isFinite(x) && Number.isFinite(y) && Number.isFinite(z))) {
      out.push(null);
      continue;
    }
    const fz = (z - view.cameraZ) / view.surfaceZ;
    if (Math.abs(fz) < 1e-12) {
      out.push(null);
      continue;
    }
    out.push([cx + (x / fz) * view.pixelsPerUnit, cy - (y / fz) * view.pixelsPerUnit]);
  }
  return out;
}

// The slice of CanvasRenderingContext2D the wireframe needs; tests
// substitute a recording stub.
export interface StrokeContext {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
}

export function drawWireframe(
  ctx: StrokeContext,
  coords: Float64Array,
  triangles: Array<[number, number, number]>,
  view: ViewConfig = DEFAULT_VIEW,
  stroke = "#1a2633",
): number {
  const pixels = projectPoints(coords, view);
  ctx.clearRect(0, 0, view.width, view.height);
  ctx.strokeStyle = stroke;
  ctx.lineWidth = 0.6;
  ctx.beginPath();
  let drawn = 0;
  for (const [a, b, c] of triangles) {
    const pa = pixels[a];
    const pb = pixels[b];
    const pc = pixels[c];
    if (pa === null || pb === null || pc === null) continue;
    ctx.moveTo(pa[0], pa[1]);
    ctx.lineTo(pb[0], pb[1]);
    ctx.lineTo(pc[0], pc[1]);
    ctx.lineTo(pa[0], pa[1]);
    drawn += 1;
  }
  ctx.stroke();
  return drawn;
}
