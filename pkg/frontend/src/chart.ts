export interface Series {
  label: string;
  color: string;
  values: Array<number | null>;
}

/** Minimal line chart for the per-round score and mAP history. */
export function drawChart(canvas: HTMLCanvasElement, series: Series[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  const pad = 28;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#161b22";
  ctx.fillRect(0, 0, width, height);

  const present = series.flatMap((s) => s.values.filter((v): v is number => v !== null));
  if (present.length === 0) {
    ctx.fillStyle = "#8b949e";
    ctx.font = "12px sans-serif";
    ctx.fillText("no history yet", pad, height / 2);
    return;
  }
  const maxLen = Math.max(...series.map((s) => s.values.length));
  const lo = Math.min(0, ...present);
  const hi = Math.max(1e-9, ...present);
  const x = (i: number) => pad + (maxLen <= 1 ? 0 : (i / (maxLen - 1)) * (width - 2 * pad));
  const y = (v: number) => height - pad - ((v - lo) / (hi - lo)) * (height - 2 * pad);

  ctx.strokeStyle = "#30363d";
  ctx.strokeRect(pad, pad, width - 2 * pad, height - 2 * pad);

  series.forEach((s, idx) => {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    let started = false;
    s.values.forEach((v, i) => {
      if (v === null) return;
      if (!started) {
        ctx.moveTo(x(i), y(v));
        started = true;
      } else {
        ctx.lineTo(x(i), y(v));
      }
    });
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.font = "11px sans-serif";
    ctx.fillText(s.label, pad + 4, pad + 12 + idx * 13);
  });
}
