// Maps pointer and scroll events to engine input. The screen-to-world
// scale is fixed so lane widths stay visually faithful (an 11 cm lane is
// 44 px wide); an on-screen ruler shows it.

export const PX_PER_METER = 400;

/** Lateral position in meters of a pointer x relative to the view center. */
export function pointerToLateral(clientX: number, centerX: number): number {
  return (clientX - centerX) / PX_PER_METER;
}

/** Floor point in meters of a click inside the foot-grid view:
 * +y points up-screen (ahead of the user), origin at the grid anchor. */
export function clickToFloorPoint(
  clientX: number,
  clientY: number,
  originX: number,
  originY: number,
): { x: number; y: number } {
  return {
    x: (clientX - originX) / PX_PER_METER,
    y: (originY - clientY) / PX_PER_METER,
  };
}

/** Accumulates wheel/drag deltas into a clamped hand distance. */
export class DistanceDial {
  constructor(
    private value: number,
    private min: number,
    private max: number,
    private metersPerWheelStep = 0.0125,
  ) {}

  get distance(): number {
    return this.value;
  }

  wheel(deltaY: number): number {
    // Scrolling up (negative delta) moves the hand outward.
    this.value -= (deltaY / 100) * this.metersPerWheelStep;
    this.value = Math.min(this.max, Math.max(this.min, this.value));
    return this.value;
  }
}

/** Walking clock: the operator only steers laterally; the forward position
 * advances at a constant walking speed, like the real technique. */
export class WalkClock {
  private startMs: number | null = null;

  constructor(private speed = 1.2) {}

  sample(nowMs: number, lateral: number): { t: number; x: number; y: number } {
    if (this.startMs === null) {
      this.startMs = nowMs;
    }
    const t = (nowMs - this.startMs) / 1000;
    return { t, x: lateral, y: this.speed * t };
  }

  reset(): void {
    this.startMs = null;
  }
}
