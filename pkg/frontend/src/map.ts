// Minimal pannable canvas map: plots a route polyline and the latest
// courier position on a plain grid, no tile service. Drag to pan, +/- to
// zoom. Good enough to watch a parcel move across town.

export interface MapPoint {
  lat: number;
  lon: number;
}

export class CanvasMap {
  private ctx: CanvasRenderingContext2D;
  private points: MapPoint[] = [];
  private markers: MapPoint[] = [];
  private center: MapPoint = { lat: 48.15, lon: 17.11 };
  private pxPerDegree = 4000;
  private dragging: { x: number; y: number } | null = null;

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    this.ctx = ctx;
    canvas.addEventListener("mousedown", (e) => {
      this.dragging = { x: e.offsetX, y: e.offsetY };
    });
    canvas.addEventListener("mousemove", (e) => {
      if (!this.dragging) return;
      const dx = e.offsetX - this.dragging.x;
      const dy = e.offsetY - this.dragging.y;
      this.dragging = { x: e.offsetX, y: e.offsetY };
      this.center = {
        lat: this.center.lat + dy / this.pxPerDegree,
        lon: this.center.lon - dx / this.pxPerDegree,
      };
      this.draw();
    });
    const stop = () => (this.dragging = null);
    canvas.addEventListener("mouseup", stop);
    canvas.addEventListener("mouseleave", stop);
  }

  zoom(factor: number): void {
    this.pxPerDegree = Math.min(2_000_000, Math.max(50, this.pxPerDegree * factor));
    this.draw();
  }

  setTrack(points: MapPoint[]): void {
    this.points = points.slice();
    if (points.length) this.center = points[points.length - 1];
    this.draw();
  }

  addPoint(p: MapPoint): void {
    this.points.push(p);
    this.center = p;
    this.draw();
  }

  setMarkers(markers: MapPoint[]): void {
    this.markers = markers.slice();
    if (!this.points.length && markers.length) this.center = markers[0];
    this.draw();
  }

  onClick(fn: (p: MapPoint) => void): void {
    this.canvas.addEventListener("click", (e) => fn(this.toGeo(e.offsetX, e.offsetY)));
  }

  private toPx(p: MapPoint): { x: number; y: number } {
    return {
      x: this.canvas.width / 2 + (p.lon - this.center.lon) * this.pxPerDegree,
      y: this.canvas.height / 2 - (p.lat - this.center.lat) * this.pxPerDegree,
    };
  }

  private toGeo(x: number, y: number): MapPoint {
    return {
      lon: this.center.lon + (x - this.canvas.width / 2) / this.pxPerDegree,
      lat: this.center.lat - (y - this.canvas.height / 2) / this.pxPerDegree,
    };
  }

  draw(): void {
    const { ctx, canvas } = this;
    ctx.fillStyle = "#f3f5f2";
    ctx.fillRect(0, 0, canvas.width, canvas.height);

    // Light graticule every 0.01 degrees.
    ctx.strokeStyle = "#dde3dd";
    ctx.lineWidth = 1;
    const step = 0.01 * this.pxPerDegree;
    if (step > 8) {
      const offX = ((this.center.lon % 0.01) + 0.01) % 0.01 * this.pxPerDegree;
      const offY = ((this.center.lat % 0.01) + 0.01) % 0.01 * this.pxPerDegree;
      for (let x = (canvas.width / 2 - offX) % step; x < canvas.width; x += step) {
        ctx.beginPath(); ctx.moveTo(x, 0); ctx.lineTo(x, canvas.height); ctx.stroke();
      }
      for (let y = (canvas.height / 2 + offY) % step; y < canvas.height; y += step) {
        ctx.beginPath(); ctx.moveTo(0, y); ctx.lineTo(canvas.width, y); ctx.stroke();
      }
    }

    if (this.points.length > 1) {
      ctx.strokeStyle = "#2563eb";
      ctx.lineWidth = 2;
      ctx.beginPath();
      this.points.forEach((p, i) => {
        const { x, y } = this.toPx(p);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
    }
    for (const m of this.markers) {
      const { x, y } = this.toPx(m);
      ctx.fillStyle = "#9333ea";
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, Math.PI * 2);
      ctx.fill();
    }
    if (this.points.length) {
      const last = this.toPx(this.points[this.points.length - 1]);
      ctx.fillStyle = "#dc2626";
      ctx.beginPath();
      ctx.arc(last.x, last.y, 6, 0, Math.PI * 2);
      ctx.fill();
      ctx.fillStyle = "#ffffff";
      ctx.beginPath();
      ctx.arc(last.x, last.y, 2.5, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}
