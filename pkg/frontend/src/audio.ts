// Audio playback adapter. The app listens for "X finished playing" to
// unlock the answer buttons; tests inject a fake that fires instantly.

export interface SamplePlayer {
  /** Prepare a sample for the given slot and source URL. */
  load(slot: "A" | "B" | "X", url: string): void;
  /** Subscribe to full-playback completion of a slot. */
  onEnded(slot: "A" | "B" | "X", handler: () => void): void;
  /** Release resources between trials. */
  reset(): void;
}

export class HtmlAudioPlayer implements SamplePlayer {
  private elements = new Map<string, HTMLAudioElement>();
  private handlers = new Map<string, () => void>();

  constructor(private container: HTMLElement) {}

  load(slot: "A" | "B" | "X", url: string): void {
    let element = this.elements.get(slot);
    if (!element) {
      element = document.createElement("audio");
      element.controls = true;
      element.preload = "auto";
      element.setAttribute("data-slot", slot);
      const row = document.createElement("div");
      row.className = "sample-row";
      const label = document.createElement("span");
      label.className = "sample-label";
      label.textContent = slot;
      row.append(label, element);
      this.container.append(row);
      this.elements.set(slot, element);
      element.addEventListener("ended", () => this.handlers.get(slot)?.());
    }
    element.src = url;
  }

  onEnded(slot: "A" | "B" | "X", handler: () => void): void {
    this.handlers.set(slot, handler);
  }

  reset(): void {
    for (const element of this.elements.values()) {
      element.pause();
      element.removeAttribute("src");
    }
    this.handlers.clear();
  }
}
